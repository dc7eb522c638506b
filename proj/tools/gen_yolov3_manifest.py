#!/usr/bin/env python3
# Copyright 2026 The structprune Authors. All Rights Reserved.
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
"""Emits a layer manifest for a darknet-style YOLOv3 detector (1 class, 3 anchors per scale)."""
import argparse
import json

parser = argparse.ArgumentParser()
parser.add_argument("--size", type=int, default=320)
parser.add_argument("--classes", type=int, default=1)
args = parser.parse_args()

head = 3 * (4 + 1 + args.classes)
layers = [{"kind": "input", "F": 3, "H_out": args.size, "W_out": args.size}]
shape = [3, args.size, args.size]  # channels, h, w of the running output
outputs = []  # per darknet layer index: (channels, h, w)
# Manifest indices are shifted by one for the leading input descriptor.


def conv(filters, k, stride=1, prunable=True, act="leaky"):
    c, h, w = shape
    ho, wo = -(-h // stride), -(-w // stride)
    layers.append({"kind": "conv", "F": filters, "C": c, "KH": k, "KW": k, "stride": stride,
                   "pad": k // 2, "H_out": ho, "W_out": wo, "activation": act, "prunable": prunable})
    shape[:] = [filters, ho, wo]
    outputs.append(tuple(shape))


def shortcut(frm):
    src = len(outputs) + frm
    layers.append({"kind": "shortcut", "from": [src + 1], "F": shape[0], "C": shape[0],
                   "H_out": shape[1], "W_out": shape[2]})
    outputs.append(tuple(shape))


def route(*srcs):
    idx = [s if s >= 0 else len(outputs) + s for s in srcs]
    c = sum(outputs[i][0] for i in idx)
    h, w = outputs[idx[0]][1], outputs[idx[0]][2]
    layers.append({"kind": "route", "from": [i + 1 for i in idx], "F": c, "C": c, "H_out": h, "W_out": w})
    shape[:] = [c, h, w]
    outputs.append(tuple(shape))


def upsample():
    c, h, w = shape
    layers.append({"kind": "upsample", "F": c, "C": c, "stride": 2, "H_out": 2 * h, "W_out": 2 * w})
    shape[:] = [c, 2 * h, 2 * w]
    outputs.append(tuple(shape))


def detect():
    c, h, w = shape
    layers.append({"kind": "detect", "F": c, "C": c, "H_out": h, "W_out": w})
    outputs.append(tuple(shape))


def residual(n, ch):
    for _ in range(n):
        conv(ch // 2, 1)
        conv(ch, 3)
        shortcut(-3)


conv(32, 3)
conv(64, 3, 2)
residual(1, 64)
conv(128, 3, 2)
residual(2, 128)
conv(256, 3, 2)
residual(8, 256)
conv(512, 3, 2)
residual(8, 512)
conv(1024, 3, 2)
residual(4, 1024)


def neck(ch):
    for _ in range(2):
        conv(ch, 1)
        conv(ch * 2, 3)
    conv(ch, 1)
    conv(ch * 2, 3)
    conv(head, 1, prunable=False, act="linear")
    detect()


neck(512)
route(-4)
conv(256, 1)
upsample()
route(-1, 61)
neck(256)
route(-4)
conv(128, 1)
upsample()
route(-1, 36)
neck(128)

print(json.dumps(layers, indent=1))
