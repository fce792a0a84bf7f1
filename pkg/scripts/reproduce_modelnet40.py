"""Full-benchmark classification run with the default encoder and memory bank.

Accepted layouts for ROOT:

* ``modelnet40_ply_hdf5_2048``: ``ply_data_{train,test}*.h5`` (needs h5py)
* ``modelnet40_normal_resampled``: ``modelnet40_{train,test}.txt`` id lists,
  ``<class>/<id>.txt`` comma-separated rows
* raw ModelNet40 meshes: ``<class>/{train,test}/*.off`` (surface-sampled)
* ScanObjectNN (``--scanobjectnn``): ``training_objectdataset_augmentedrot_scale75.h5``
  and ``test_objectdataset_augmentedrot_scale75.h5`` (PB-T50-RS, needs h5py)

The last output line is ``accuracy=<percent>``.

    python scripts/reproduce_modelnet40.py /data/modelnet40_ply_hdf5_2048 --workers 8
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from pointnn import EncoderConfig, evaluate_classification
from pointnn.datasets import LabeledDataset
from pointnn.io import read_off, sample_mesh_surface


def _h5_split(files, points):
    import h5py

    clouds, labels = [], []
    for f in files:
        with h5py.File(f, "r") as h5:
            clouds.extend(np.asarray(h5["data"][:, :points, :3], dtype=np.float64))
            labels.extend(np.asarray(h5["label"]).reshape(-1).tolist())
    return clouds, np.array(labels)


def load_hdf5(root, points):
    root = Path(root)
    names_file = root / "shape_names.txt"
    names = names_file.read_text().split() if names_file.exists() else None
    splits = {}
    for split in ("train", "test"):
        files = sorted(root.glob(f"ply_data_{split}*.h5"))
        if not files:
            raise FileNotFoundError(f"no ply_data_{split}*.h5 under {root}")
        splits[split] = _h5_split(files, points)
    if names is None:
        names = [f"class{i}" for i in range(int(splits["train"][1].max()) + 1)]
    return tuple(LabeledDataset(c, y, names, s) for s, (c, y) in splits.items())


def load_resampled(root, points):
    root = Path(root)
    names = (root / "modelnet40_shape_names.txt").read_text().split()
    index = {n: i for i, n in enumerate(names)}
    out = []
    for split in ("train", "test"):
        ids = (root / f"modelnet40_{split}.txt").read_text().split()
        clouds, labels = [], []
        for sid in ids:
            cls = sid.rsplit("_", 1)[0]
            pts = np.loadtxt(root / cls / f"{sid}.txt", delimiter=",", max_rows=points)[:, :3]
            clouds.append(pts)
            labels.append(index[cls])
        out.append(LabeledDataset(clouds, labels, names, split))
    return tuple(out)


def load_meshes(root, points):
    root = Path(root)
    names = sorted(d.name for d in root.iterdir() if (d / "train").is_dir())
    out = []
    for split in ("train", "test"):
        clouds, labels = [], []
        for i, name in enumerate(names):
            for off in sorted((root / name / split).glob("*.off")):
                clouds.append(sample_mesh_surface(read_off(off), points, seed=0))
                labels.append(i)
        out.append(LabeledDataset(clouds, labels, names, split))
    return tuple(out)


def load_scanobjectnn(root, points):
    root = Path(root)
    tag = "objectdataset_augmentedrot_scale75.h5"
    train = _h5_split([root / f"training_{tag}"], points)
    test = _h5_split([root / f"test_{tag}"], points)
    names = [f"class{i}" for i in range(int(train[1].max()) + 1)]
    return LabeledDataset(*train, names, "train"), LabeledDataset(*test, names, "test")


def load(root, points, scanobjectnn=False):
    root = Path(root)
    if scanobjectnn:
        return load_scanobjectnn(root, points)
    if list(root.glob("ply_data_train*.h5")):
        return load_hdf5(root, points)
    if (root / "modelnet40_train.txt").exists():
        return load_resampled(root, points)
    return load_meshes(root, points)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("root")
    p.add_argument("--points", type=int, default=1024)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--gamma", default="100", help="number, or 'auto' for leave-one-out selection")
    p.add_argument("--scanobjectnn", action="store_true")
    args = p.parse_args(argv)

    t0 = time.perf_counter()
    train, test = load(args.root, args.points, args.scanobjectnn)
    print(f"loaded {len(train)} train / {len(test)} test clouds in {time.perf_counter() - t0:.0f}s",
          file=sys.stderr)
    gamma = args.gamma if args.gamma == "auto" else float(args.gamma)
    report = evaluate_classification(train, test, EncoderConfig(), gamma=gamma, workers=args.workers)
    print(report.format(timing=True))
    print(f"accuracy={report.accuracy:.2f}")


if __name__ == "__main__":
    main()
