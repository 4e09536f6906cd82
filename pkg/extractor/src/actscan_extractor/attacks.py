"""Gradient-based perturbations of [0,1]-scaled images.

Untargeted attacks against the model's own prediction: the perturbation
ascends the loss of the currently predicted class, and an attack on an image
counts as successful only if the predicted label changes. The epsilon budget
is a max-norm bound in the [0,1] pixel space.
"""

from __future__ import annotations

import torch
from torch import nn


def _loss_grad(model, images, labels) -> torch.Tensor:
    images = images.clone().detach().requires_grad_(True)
    loss = nn.functional.cross_entropy(model(images), labels)
    (grad,) = torch.autograd.grad(loss, images)
    return grad


def fgsm(model, images: torch.Tensor, eps: float) -> torch.Tensor:
    """Single-step sign-of-gradient perturbation."""
    model.eval()
    with torch.no_grad():
        base_pred = model(images).argmax(dim=1)
    grad = _loss_grad(model, images, base_pred)
    return (images + eps * grad.sign()).clamp(0.0, 1.0).detach()


def bim(model, images: torch.Tensor, eps: float, steps: int = 10) -> torch.Tensor:
    """Iterative variant of fgsm, each step clipped back into the eps ball."""
    model.eval()
    with torch.no_grad():
        base_pred = model(images).argmax(dim=1)
    step = eps / max(steps, 1)
    adv = images.clone()
    for _ in range(steps):
        grad = _loss_grad(model, adv, base_pred)
        adv = adv + step * grad.sign()
        adv = images + (adv - images).clamp(-eps, eps)
        adv = adv.clamp(0.0, 1.0).detach()
    return adv


def apply_attack(model, images: torch.Tensor, name: str, **params) -> torch.Tensor:
    name = name.lower()
    if name == "none" or (name in ("fgsm", "bim") and float(params.get("eps", 0.0)) == 0.0):
        return images.clone()
    if name == "fgsm":
        return fgsm(model, images, float(params["eps"]))
    if name == "bim":
        return bim(model, images, float(params["eps"]), int(params.get("steps", 10)))
    if name == "cw":
        raise NotImplementedError(
            "the cw attack requires an external attack library, which is not "
            "available in this environment; use fgsm or bim"
        )
    raise ValueError(f"unknown attack {name!r}")
