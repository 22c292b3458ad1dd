"""Ensemble training: N networks with distinct seeds, MSE loss, Adam at the
spec's learning rate, fixed epoch count (no early stopping)."""

from __future__ import annotations

import json
import os
import time

import numpy as np
import torch
from torch import nn

from .data import load_instances, split_indices
from .model import NetworkSpec, TippingNet, TrainConfig


def _to_tensor(x):
    # (n, 500, 2) -> (n, 1, 500, 2)
    return torch.from_numpy(x).unsqueeze(1)


def train_one(inputs, labels, train_idx, val_idx, spec, cfg, net_seed,
              log_every=0):
    torch.manual_seed(net_seed)
    net = TippingNet(spec)
    opt = torch.optim.Adam(net.parameters(), lr=spec.lr)
    loss_fn = nn.MSELoss()
    x_train = _to_tensor(inputs[train_idx])
    y_train = torch.from_numpy(labels[train_idx])
    x_val = _to_tensor(inputs[val_idx])
    y_val = torch.from_numpy(labels[val_idx])
    gen = torch.Generator().manual_seed(net_seed + 1)
    history = []
    n = len(train_idx)
    for epoch in range(cfg.epochs):
        net.train()
        order = torch.randperm(n, generator=gen)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            sel = order[start:start + cfg.batch_size]
            opt.zero_grad()
            pred = net(x_train[sel])
            loss = loss_fn(pred, y_train[sel])
            loss.backward()
            opt.step()
            total += float(loss.detach()) * len(sel)
        train_mse = total / n
        net.eval()
        with torch.no_grad():
            val_mse = float(loss_fn(net(x_val), y_val))
        history.append({"epoch": epoch, "train_mse": train_mse,
                        "val_mse": val_mse})
        if log_every and (epoch + 1) % log_every == 0:
            print(f"    net seed={net_seed} epoch {epoch + 1}/{cfg.epochs} "
                  f"train={train_mse:.4f} val={val_mse:.4f}", flush=True)
    return net, history


def train(corpus_path, out_dir, spec=None, cfg=None, log_every=0):
    """Train cfg.ensemble networks on an instance file; persist weights and a
    metrics JSON (final train/val MSE per network plus the ensemble's
    held-out MSE)."""
    spec = spec or NetworkSpec.for_variant("dl")
    cfg = cfg or TrainConfig()
    inputs, labels = load_instances(corpus_path)
    train_idx, val_idx, test_idx = split_indices(len(labels), cfg.seed,
                                                 cfg.split)
    os.makedirs(out_dir, exist_ok=True)
    torch.set_num_threads(max(1, os.cpu_count() or 1))
    nets = []
    metrics = {"networks": [], "config": {"epochs": cfg.epochs,
                                          "ensemble": cfg.ensemble,
                                          "seed": cfg.seed,
                                          "batch_size": cfg.batch_size,
                                          "split": list(cfg.split),
                                          "variant": cfg.variant,
                                          "corpus": os.path.abspath(corpus_path),
                                          "n_instances": int(len(labels))},
               "spec": spec.to_dict()}
    t0 = time.time()
    for k in range(cfg.ensemble):
        net, history = train_one(inputs, labels, train_idx, val_idx, spec,
                                 cfg, net_seed=cfg.seed * 1000 + k,
                                 log_every=log_every)
        path = os.path.join(out_dir, f"net_{k}.pt")
        torch.save({"state_dict": net.state_dict(),
                    "spec": spec.to_dict()}, path)
        nets.append(net)
        metrics["networks"].append({
            "file": os.path.basename(path),
            "final_train_mse": history[-1]["train_mse"],
            "final_val_mse": history[-1]["val_mse"],
            "history": history})
        if log_every:
            print(f"  network {k + 1}/{cfg.ensemble} done "
                  f"(val {history[-1]['val_mse']:.4f})", flush=True)
    # ensemble-mean held-out error
    with torch.no_grad():
        x_val = _to_tensor(inputs[val_idx])
        preds = torch.stack([net(x_val) for net in nets]).mean(dim=0)
        ens_val = float(nn.functional.mse_loss(
            preds, torch.from_numpy(labels[val_idx])))
        ens_test = None
        if len(test_idx):
            x_test = _to_tensor(inputs[test_idx])
            tp = torch.stack([net(x_test) for net in nets]).mean(dim=0)
            ens_test = float(nn.functional.mse_loss(
                tp, torch.from_numpy(labels[test_idx])))
    metrics["ensemble_val_mse"] = ens_val
    metrics["ensemble_test_mse"] = ens_test
    metrics["wall_seconds"] = time.time() - t0
    with open(os.path.join(out_dir, "metrics.json"), "w") as fh:
        json.dump(metrics, fh, indent=1)
    return metrics
