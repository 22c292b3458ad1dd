"""Ensemble inference and the prediction-file contract
(`index,label_norm_hat` CSV consumed by the driving toolkit)."""

from __future__ import annotations

import glob
import os

import numpy as np
import torch

from .data import load_instances
from .model import NetworkSpec, TippingNet


def load_ensemble(model_dir):
    paths = sorted(glob.glob(os.path.join(model_dir, "net_*.pt")))
    if not paths:
        raise FileNotFoundError(f"no net_*.pt artifacts in {model_dir}")
    nets = []
    for p in paths:
        blob = torch.load(p, map_location="cpu", weights_only=True)
        spec_d = dict(blob["spec"])
        spec_d["conv_kernel"] = tuple(spec_d["conv_kernel"])
        spec_d["pool"] = tuple(spec_d["pool"])
        net = TippingNet(NetworkSpec(**spec_d))
        net.load_state_dict(blob["state_dict"])
        net.eval()
        nets.append(net)
    return nets


def predict_instances(nets, inputs):
    """Ensemble-mean prediction for inputs of shape (n, 500, 2)."""
    if inputs.ndim != 3 or inputs.shape[1:] != (500, 2):
        raise ValueError(f"expected (n, 500, 2) inputs, got {inputs.shape}")
    x = torch.from_numpy(np.ascontiguousarray(inputs, dtype=np.float32))
    x = x.unsqueeze(1)
    with torch.no_grad():
        preds = torch.stack([net(x) for net in nets]).mean(dim=0)
    return preds.numpy().astype(np.float64)


def predict_file(model_dir, instances_path, out_path):
    nets = load_ensemble(model_dir)
    inputs, _ = load_instances(instances_path)
    preds = predict_instances(nets, inputs)
    export_prediction_file(out_path, preds)
    return preds


def export_prediction_file(path, preds):
    """Plain ASCII CSV, one `index,label_norm_hat` row per instance."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("index,label_norm_hat\n")
        for i, v in enumerate(preds):
            fh.write("%d,%.17g\n" % (i, v))
