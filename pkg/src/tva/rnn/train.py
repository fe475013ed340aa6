"""Forward evaluation and BPTT training of :class:`RnnGenome`."""

from __future__ import annotations

import numpy as np

from ..errors import DivergedTrainingError, InvalidInputError
from ..trace import WindowSet
from . import kernels
from .genome import RnnGenome, compile_genome, write_back

DEFAULT_LR = 0.001
DEFAULT_CLIP = 1.0
DEFAULT_EPOCHS = 10


def _check_inputs(g, X):
    if X.ndim != 3 or X.shape[2] != len(g.input_channels):
        raise InvalidInputError(
            f"expected input vectors of dimension {len(g.input_channels)}, got array of shape {X.shape}")


def forward(g: RnnGenome, inputs) -> np.ndarray:
    """Run one sequence (T x n_in) through the network from a zero state; returns T x n_out."""
    X = np.asarray(inputs, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    _check_inputs(g, X[None])
    return forward_batch(g, X[None])[0]


def forward_batch(g: RnnGenome, X) -> np.ndarray:
    """Outputs for a batch of equal-length sequences, shape (W, T, n_out)."""
    X = np.ascontiguousarray(X, dtype=float)
    _check_inputs(g, X)
    plan, theta = compile_genome(g)
    return kernels.predict_batch(theta, *plan.args(), plan.out_pos, X)


def evaluate_mse(g: RnnGenome, windows: WindowSet) -> float:
    """Mean squared error over every window, step and target channel."""
    if len(windows) == 0:
        raise InvalidInputError("empty WindowSet")
    _check_inputs(g, windows.inputs)
    plan, theta = compile_genome(g)
    sse = kernels.sse_batch(theta, *plan.args(), plan.out_pos, windows.inputs, windows.targets)
    return float(sse / windows.targets.size)


def loss_and_grad(g: RnnGenome, windows: WindowSet):
    """(MSE, gradient, plan, theta) for the whole WindowSet; gradient ordered like theta."""
    plan, theta = compile_genome(g)
    loss, grad = kernels.loss_and_grad(theta, *plan.args(), plan.out_pos, windows.inputs, windows.targets)
    return float(loss), grad, plan, theta


def bptt_train(g: RnnGenome, windows: WindowSet, epochs=DEFAULT_EPOCHS, lr=DEFAULT_LR, clip=DEFAULT_CLIP,
               batch_size=1, seed=None):
    """Train a copy of ``g`` with full BPTT inside each window and plain SGD.

    Windows are visited in order unless ``seed`` is given, in which case each
    epoch uses a fresh permutation drawn from ``numpy.random.default_rng(seed)``.
    The gradient norm of each minibatch is clipped at ``clip`` (0 disables).

    Returns ``(trained_genome, per_epoch_loss)``.
    """
    if epochs < 1:
        raise InvalidInputError("epochs must be >= 1")
    if not lr >= 0:
        raise InvalidInputError("lr must be non-negative")
    if len(windows) == 0:
        raise InvalidInputError("empty WindowSet")
    _check_inputs(g, windows.inputs)
    W = len(windows)
    if seed is None:
        orders = np.tile(np.arange(W, dtype=np.int64), (epochs, 1))
    else:
        rng = np.random.default_rng(seed)
        orders = np.stack([rng.permutation(W) for _ in range(epochs)]).astype(np.int64)
    plan, theta = compile_genome(g)
    theta = theta.copy()
    losses = kernels.sgd_train(theta, *plan.args(), plan.out_pos, windows.inputs, windows.targets,
                               orders, float(lr), float(clip), int(batch_size))
    if not np.all(np.isfinite(losses)) or not np.all(np.isfinite(theta)):
        raise DivergedTrainingError(f"training diverged (losses {losses.tolist()})")
    trained = write_back(g, plan, theta)
    trained.fitness = None
    return trained, losses.tolist()
