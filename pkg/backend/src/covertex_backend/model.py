"""Small CNN carrier model and its training loop."""

from __future__ import annotations

import numpy as np
import torch
from torch import nn


class SmallCNN(nn.Module):
    """LeNet-class network for 28x28 grayscale, 10 classes."""

    def __init__(self):
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(1, 6, 5), nn.ReLU(), nn.MaxPool2d(2),
            nn.Conv2d(6, 16, 5), nn.ReLU(), nn.MaxPool2d(2),
        )
        self.classifier = nn.Sequential(
            nn.Flatten(),
            nn.Linear(16 * 4 * 4, 120), nn.ReLU(),
            nn.Linear(120, 84), nn.ReLU(),
            nn.Linear(84, 10),
        )

    def forward(self, x):
        return self.classifier(self.features(x))


def to_tensor(images: np.ndarray) -> torch.Tensor:
    arr = np.asarray(images, dtype=np.float32) / 255.0
    return torch.from_numpy(arr).reshape(-1, 1, 28, 28)


def train_epochs(model, images, labels, epochs: int, batch_size: int = 128,
                 lr: float = 1e-3, seed: int = 0) -> None:
    x = to_tensor(images)
    y = torch.from_numpy(np.asarray(labels, dtype=np.int64))
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    loss_fn = nn.CrossEntropyLoss()
    gen = torch.Generator().manual_seed(seed)
    model.train()
    for _ in range(max(1, epochs)):
        order = torch.randperm(len(x), generator=gen)
        for lo in range(0, len(x), batch_size):
            idx = order[lo : lo + batch_size]
            optimizer.zero_grad()
            loss = loss_fn(model(x[idx]), y[idx])
            loss.backward()
            optimizer.step()


@torch.no_grad()
def predict(model, images: np.ndarray, batch_size: int = 512) -> np.ndarray:
    x = to_tensor(images)
    model.eval()
    outs = []
    for lo in range(0, len(x), batch_size):
        outs.append(model(x[lo : lo + batch_size]).argmax(dim=1))
    return torch.cat(outs).numpy() if outs else np.empty(0, dtype=np.int64)


@torch.no_grad()
def accuracy(model, images, labels) -> float:
    if not len(images):
        return 0.0
    return float(np.mean(predict(model, images) == np.asarray(labels)))


@torch.no_grad()
def prune_by_magnitude(model, fraction: float) -> None:
    """Zero the smallest weights globally across conv/linear layers."""
    weights = [m.weight for m in model.modules() if isinstance(m, (nn.Conv2d, nn.Linear))]
    flat = torch.cat([w.abs().reshape(-1) for w in weights])
    if fraction <= 0:
        return
    k = min(len(flat) - 1, max(0, int(len(flat) * fraction)))
    threshold = flat.kthvalue(k + 1).values if k else flat.min() - 1
    for w in weights:
        w.mul_((w.abs() > threshold).to(w.dtype))
