"""Finite-difference gradient verification.

The oracle never touches the backward machinery: it re-runs the forward
map with perturbed inputs, so agreement means the hand-written adjoints
are right, not merely self-consistent.

Losses with kinks (absolute values, hinges, leaky corners) are only
piecewise smooth, and a central difference whose interval straddles a
kink measures the wrong thing no matter how the backward pass is
written. `screen_tol` enables a validity check on the probe itself:
the estimate at step h must agree with the estimate at h/2, a property
smooth neighbourhoods have and straddled kinks lack. Screening looks
only at the two finite differences, never at the analytic value, so it
cannot hide a wrong gradient at a smooth point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, backward


def finite_difference_grad(f: Callable[[], Tensor], param: Tensor,
                           indices: Sequence[tuple], h: float = 1e-5) -> np.ndarray:
    """Central differences of a scalar-valued closure w.r.t. param[indices]."""
    out = np.empty(len(indices), dtype=np.float64)
    for j, idx in enumerate(indices):
        orig = param.data[idx]
        param.data[idx] = orig + h
        hi = f().item()
        param.data[idx] = orig - h
        lo = f().item()
        param.data[idx] = orig
        out[j] = (hi - lo) / (2.0 * h)
    return out


@dataclass
class GradCheckReport:
    checked: int = 0
    skipped: int = 0
    failures: list[tuple[str, tuple, float]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.checked > 0 and not self.failures


def check_gradients(f: Callable[[], Tensor], params: list[tuple[str, Tensor]],
                    rng: np.random.Generator, samples_per_param: int = 2,
                    h: float = 1e-5, rel_tol: float = 1e-4,
                    abs_floor: float = 1e-6,
                    screen_tol: float | None = None) -> GradCheckReport:
    """Compare autodiff gradients of f() against central differences.

    Samples `samples_per_param` random coordinates from every parameter,
    so up to len(params) * samples_per_param scalar checks run.
    Relative error uses max(|a|, |fd|, abs_floor) as the denominator so
    jointly-tiny gradients do not produce spurious failures. With
    screen_tol set, probes whose h and h/2 estimates disagree by more
    than that relative amount are counted as skipped instead of checked.
    """
    for _, p in params:
        p.grad = None
    loss = f()
    backward(loss, free_graph=True)
    report = GradCheckReport()
    for name, p in params:
        if p.grad is None:
            raise AssertionError(f"parameter '{name}' received no gradient")
        k = min(samples_per_param, p.size)
        flat = rng.choice(p.size, size=k, replace=False)
        indices = [np.unravel_index(i, p.shape) for i in flat]
        analytic = np.array([p.grad[idx] for idx in indices], dtype=np.float64)
        numeric = finite_difference_grad(f, p, indices, h=h)
        if screen_tol is not None:
            numeric_half = finite_difference_grad(f, p, indices, h=h / 2)
        for j, (idx, a, n) in enumerate(zip(indices, analytic, numeric)):
            if screen_tol is not None:
                n2 = numeric_half[j]
                scale = max(abs(n), abs(n2), abs_floor)
                if abs(n - n2) > screen_tol * scale:
                    report.skipped += 1
                    continue
                n = n2  # the tighter of the two agreeing estimates
            report.checked += 1
            rel = abs(a - n) / max(abs(a), abs(n), abs_floor)
            if rel > rel_tol:
                report.failures.append((name, idx, float(rel)))
    return report
