"""Seven-hidden-layer tanh CNN over 32x32 RGB images, with activation taps.

tanh activations keep "extreme" well-defined in both directions (relu zeros
out anomalously negative pre-activations, which hides them from one-sided
p-values). Hidden-layer sizes, in capture order:

    Conv1 32768, Conv2 28800, Pool1 7200, Conv3 14400, Conv4 10816,
    Pool2 2304, Flat 512   (total 96800)

Captured values are post-activation (and post-pooling for the two pool
taps); convolutional maps flatten channel-major then spatial row-major.
"""

from __future__ import annotations

import torch
from torch import nn

LAYER_SIZES = (
    ("Conv1", 32768),
    ("Conv2", 28800),
    ("Pool1", 7200),
    ("Conv3", 14400),
    ("Conv4", 10816),
    ("Pool2", 2304),
    ("Flat", 512),
)
TOTAL_NODES = sum(size for _, size in LAYER_SIZES)
NUM_CLASSES = 10


class ActivationCnn(nn.Module):
    def __init__(self, num_classes: int = NUM_CLASSES):
        super().__init__()
        self.conv1 = nn.Conv2d(3, 32, 3, padding=1)
        self.conv2 = nn.Conv2d(32, 32, 3)
        self.pool1 = nn.MaxPool2d(2)
        self.drop1 = nn.Dropout(0.25)
        self.conv3 = nn.Conv2d(32, 64, 3, padding=1)
        self.conv4 = nn.Conv2d(64, 64, 3)
        self.pool2 = nn.MaxPool2d(2)
        self.drop2 = nn.Dropout(0.25)
        self.fc1 = nn.Linear(64 * 6 * 6, 512)
        self.drop3 = nn.Dropout(0.5)
        self.fc2 = nn.Linear(512, num_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.forward_with_taps(x)[0]

    def forward_with_taps(self, x: torch.Tensor):
        """Logits plus the seven per-layer activation tensors, capture order."""
        x = x * 2.0 - 1.0  # center [0,1] pixels; tanh stacks train poorly off-center
        a1 = torch.tanh(self.conv1(x))
        a2 = torch.tanh(self.conv2(a1))
        p1 = self.pool1(a2)
        h = self.drop1(p1)
        a3 = torch.tanh(self.conv3(h))
        a4 = torch.tanh(self.conv4(a3))
        p2 = self.pool2(a4)
        h = self.drop2(p2)
        flat = torch.tanh(self.fc1(torch.flatten(h, 1)))
        logits = self.fc2(self.drop3(flat))
        return logits, (a1, a2, p1, a3, a4, p2, flat)


@torch.no_grad()
def capture_activations(model: ActivationCnn, images: torch.Tensor) -> torch.Tensor:
    """Per-node activation rows for a batch of images, layer order as above.

    Inference mode: dropout disabled so activations are deterministic for a
    fixed checkpoint.
    """
    model.eval()
    _, taps = model.forward_with_taps(images)
    rows = torch.cat([t.flatten(1) for t in taps], dim=1)
    assert rows.shape[1] == TOTAL_NODES
    return rows


@torch.no_grad()
def predict(model: ActivationCnn, images: torch.Tensor) -> torch.Tensor:
    model.eval()
    return model(images).argmax(dim=1)
