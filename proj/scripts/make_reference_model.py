#!/usr/bin/env python3
# Copyright 2026 The snnforge Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Regenerates the committed MNIST fixtures under data/.

Writes a 4000/1000 train/test split of the 5000-sample MNIST subset bundled
with mlxtend as IDX files, trains a small CNN (conv-bn-relu-maxpool x2,
dense-relu, dense-softmax) with torch, and exports it as an ASNN container
with raw batch-norm parameters.

    pip install mlxtend
    python3 scripts/make_reference_model.py --out data
"""

import argparse
import json
import pathlib
import struct

import numpy as np
import torch
from torch import nn


def write_idx_images(path, images):
    n, rows, cols = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


class Net(nn.Module):
    def __init__(self):
        super().__init__()
        self.conv1 = nn.Conv2d(1, 8, 3)
        self.bn1 = nn.BatchNorm2d(8)
        self.conv2 = nn.Conv2d(8, 16, 3)
        self.bn2 = nn.BatchNorm2d(16)
        self.fc1 = nn.Linear(16 * 5 * 5, 64)
        self.fc2 = nn.Linear(64, 10)

    def forward(self, x):
        x = nn.functional.max_pool2d(torch.relu(self.bn1(self.conv1(x))), 2)
        x = nn.functional.max_pool2d(torch.relu(self.bn2(self.conv2(x))), 2)
        x = torch.relu(self.fc1(x.flatten(1)))
        return self.fc2(x)


def export_asnn(model, path):
    layers = []
    blobs = []
    offset = 0

    def tensor(t):
        nonlocal offset
        arr = t.detach().cpu().numpy().astype("<f4")
        desc = {"dtype": "f32", "shape": list(arr.shape), "offset": offset,
                "length": arr.nbytes}
        offset += arr.nbytes
        return desc, arr

    def add(entry, tensors):
        # Payload order follows the sorted tensor names, matching the manifest.
        descs = {}
        for name in sorted(tensors):
            desc, arr = tensor(tensors[name])
            descs[name] = desc
            blobs.append(arr.tobytes())
        if descs:
            entry["tensors"] = descs
        layers.append(entry)

    def bn(name, m):
        sigma = torch.sqrt(m.running_var + m.eps)
        add({"kind": "batchnorm", "name": name},
            {"beta": m.bias, "gamma": m.weight, "mean": m.running_mean,
             "sigma": sigma})

    conv = {"padding": "valid", "stride": [1, 1]}
    pool = {"kind": "maxpool", "stride": [2, 2], "window": [2, 2]}
    add({"kind": "conv2d", "name": "conv1", **conv},
        {"bias": model.conv1.bias, "weight": model.conv1.weight})
    bn("bn1", model.bn1)
    add({"kind": "relu", "name": "relu1"}, {})
    add({**pool, "name": "pool1"}, {})
    add({"kind": "conv2d", "name": "conv2", **conv},
        {"bias": model.conv2.bias, "weight": model.conv2.weight})
    bn("bn2", model.bn2)
    add({"kind": "relu", "name": "relu2"}, {})
    add({**pool, "name": "pool2"}, {})
    add({"kind": "flatten", "name": "flatten"}, {})
    add({"kind": "dense", "name": "fc1"},
        {"bias": model.fc1.bias, "weight": model.fc1.weight})
    add({"kind": "relu", "name": "relu3"}, {})
    add({"kind": "dense", "name": "fc2"},
        {"bias": model.fc2.bias, "weight": model.fc2.weight})
    add({"kind": "softmax", "name": "softmax"}, {})

    manifest = {"input_shape": [1, 28, 28], "layers": layers, "layout": "NCHW",
                "normalized": False}
    text = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as f:
        f.write(b"ASNN")
        f.write(struct.pack("<IQ", 1, len(text)))
        f.write(text)
        for b in blobs:
            f.write(b)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data")
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    from mlxtend.data import mnist_data

    x, y = mnist_data()
    rng = np.random.default_rng(0)
    order = rng.permutation(len(y))
    x = x[order].reshape(-1, 28, 28)
    y = y[order]
    out = pathlib.Path(args.out)
    (out / "mnist5k").mkdir(parents=True, exist_ok=True)
    write_idx_images(out / "mnist5k/train-images-idx3-ubyte", x[:4000])
    write_idx_labels(out / "mnist5k/train-labels-idx1-ubyte", y[:4000])
    write_idx_images(out / "mnist5k/test-images-idx3-ubyte", x[4000:])
    write_idx_labels(out / "mnist5k/test-labels-idx1-ubyte", y[4000:])

    torch.manual_seed(args.seed)
    xt = torch.tensor(x, dtype=torch.float32).unsqueeze(1) / 255.0
    yt = torch.tensor(y, dtype=torch.long)
    model = Net()
    opt = torch.optim.Adam(model.parameters(), lr=2e-3)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, args.epochs)
    for epoch in range(args.epochs):
        model.train()
        perm = torch.randperm(4000)
        for i in range(0, 4000, 64):
            idx = perm[i:i + 64]
            batch = xt[idx]
            # Small random shifts; the dataset is tiny.
            dx, dy = np.random.randint(-2, 3, size=2)
            batch = torch.roll(batch, shifts=(int(dy), int(dx)), dims=(2, 3))
            loss = nn.functional.cross_entropy(model(batch), yt[idx])
            opt.zero_grad()
            loss.backward()
            opt.step()
        sched.step()
        model.eval()
        with torch.no_grad():
            acc = (model(xt[4000:]).argmax(1) == yt[4000:]).float().mean()
        print(f"epoch {epoch + 1}: test accuracy {acc:.4f}")

    (out / "models").mkdir(parents=True, exist_ok=True)
    export_asnn(model, out / "models/mnist_cnn.asnn")
    with open(out / "models/mnist_cnn.json", "w") as f:
        json.dump({"epochs": args.epochs, "seed": args.seed,
                   "test_accuracy": float(acc), "train_samples": 4000,
                   "test_samples": 1000}, f, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
