#!/usr/bin/env python3
"""Convert pretrained weights into depthstyle tensor archives.

  export_weights.py vgg16 --output vgg16.dsa [--state-dict vgg16.pth | --npz w.npz] [--width-divisor 1]
  export_weights.py depth --output depth.dsa --npz depth.npz --native-size 128 --widths 16,32,64 [--output-scale 1]

Without --state-dict or --npz the vgg16 mode downloads torchvision's ImageNet weights.
The npz keys must match the archive keys ("features.<i>.weight|bias" or
"enc<i>|mid|dec<i>|head.weight|bias"). Prints the SHA-256 to put in the config.
"""

import argparse
import hashlib
import json
import struct
import sys
import zlib

import numpy as np

MAGIC = b"DSTYLARC"
VERSION = 1
VGG_BLOCKS = [[64, 64], [128, 128], [256, 256, 256], [512, 512, 512]]


def vgg_layout(divisor):
    keys, idx, cin = [], 0, 3
    for b, block in enumerate(VGG_BLOCKS):
        if b > 0:
            idx += 1
        for width in block:
            out = width // divisor
            keys.append((f"features.{idx}.weight", (out, cin, 3, 3)))
            keys.append((f"features.{idx}.bias", (1, out, 1, 1)))
            idx += 2
            cin = out
    return keys


def depth_layout(widths):
    keys, cin = [], 3

    def conv(name, out, inp):
        keys.append((f"{name}.weight", (out, inp, 3, 3)))
        keys.append((f"{name}.bias", (1, out, 1, 1)))

    for i, w in enumerate(widths):
        conv(f"enc{i}", w, cin)
        cin = w
    conv("mid", cin, cin)
    for i in range(len(widths)):
        out = widths[len(widths) - 2 - i] if i + 1 < len(widths) else widths[0]
        conv(f"dec{i}", out, cin)
        cin = out
    conv("head", 1, cin)
    return keys


def write_archive(path, kind, meta, tensors):
    entries, payload, offset = [], bytearray(), 0
    for name, array in tensors:
        data = np.ascontiguousarray(array, dtype="<f4").tobytes()
        entries.append({"name": name, "dtype": "f32", "shape": list(array.shape), "offset": offset, "bytes": len(data)})
        payload += data
        offset += len(data)
    header = json.dumps({"kind": kind, "meta": meta, "tensors": entries}, separators=(",", ":")).encode()
    body = header + bytes(payload)
    blob = MAGIC + struct.pack("<IIQQ", VERSION, 0, len(header), len(payload)) + body
    blob += struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)
    with open(path, "wb") as f:
        f.write(blob)
    return hashlib.sha256(blob).hexdigest()


def load_source(args):
    if args.npz:
        with np.load(args.npz) as z:
            return {k: z[k] for k in z.files}
    import torch

    if args.state_dict:
        sd = torch.load(args.state_dict, map_location="cpu")
    else:
        import torchvision

        sd = torchvision.models.vgg16(weights=torchvision.models.VGG16_Weights.IMAGENET1K_V1).state_dict()
    return {k: v.detach().cpu().numpy() for k, v in sd.items()}


def gather(source, layout):
    out = []
    for key, shape in layout:
        if key not in source:
            sys.exit(f"missing tensor {key}")
        a = np.asarray(source[key], dtype=np.float32)
        if a.size != int(np.prod(shape)):
            sys.exit(f"{key}: expected {shape}, got {a.shape}")
        out.append((key, a.reshape(shape)))
    return out


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("mode", choices=["vgg16", "depth"])
    p.add_argument("--output", required=True)
    p.add_argument("--state-dict")
    p.add_argument("--npz")
    p.add_argument("--width-divisor", type=int, default=1)
    p.add_argument("--native-size", type=int, default=128)
    p.add_argument("--widths", default="16,32,64")
    p.add_argument("--output-scale", type=float, default=1.0)
    args = p.parse_args()

    if args.mode == "vgg16":
        tensors = gather(load_source(args), vgg_layout(args.width_divisor))
        digest = write_archive(args.output, "depthstyle.vgg16_features", {"width_divisor": args.width_divisor}, tensors)
    else:
        if not args.npz and not args.state_dict:
            sys.exit("depth mode needs --npz or --state-dict")
        widths = [int(w) for w in args.widths.split(",")]
        config = {"native_size": args.native_size, "widths": widths, "output_scale": args.output_scale}
        tensors = gather(load_source(args), depth_layout(widths))
        digest = write_archive(args.output, "depthstyle.depth_net", {"config": config}, tensors)
    print(f"sha256 {digest}")


if __name__ == "__main__":
    main()
