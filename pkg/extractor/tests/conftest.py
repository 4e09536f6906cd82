import pytest
import torch

from actscan_extractor import ActivationCnn
from actscan_extractor.data import synthetic_images
from actscan_extractor.extract import ExtractionJob, train_model

SMOKE = dict(
    dataset="synthetic",
    epochs=8,
    batch_size=50,
    learning_rate=1e-3,
    min_accuracy=0.6,
    train_limit=200,
    seed=1,
)


@pytest.fixture(scope="session")
def trained():
    """One small model trained on the synthetic patterns, shared by tests."""
    torch.manual_seed(0)
    (train_images, train_labels), (val_images, val_labels) = synthetic_images(
        200, 80, seed=1
    )
    model = ActivationCnn()
    job = ExtractionJob(out_dir="/tmp/unused", **SMOKE)
    train_model(model, train_images, train_labels, job)
    model.eval()
    return model, val_images, val_labels
