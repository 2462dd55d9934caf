"""A-posteriori convergence-bound checks on solver traces.

Each check returns a :class:`BoundCheck` whose ``ratio`` is the worst
observed ``gap / bound`` (at most 1 when the bound holds).
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "BoundCheck",
    "sublinear_envelope",
    "fista_envelope",
    "accelerated_envelope",
    "estimate_sequence_chain",
    "lambda_recursion",
]


@dataclass(frozen=True)
class BoundCheck:
    name: str
    ok: bool
    ratio: float
    worst_k: int
    checked: int

    def __str__(self):
        verdict = "holds" if self.ok else "VIOLATED"
        return f"{self.name}: {verdict} over {self.checked} iterates (worst gap/bound {self.ratio:.3g} at k={self.worst_k})"


def _compare(name, ks, gaps, bounds, slack):
    gaps = np.asarray(gaps, dtype=float)
    bounds = np.asarray(bounds, dtype=float)
    ok = bool(np.all(gaps <= bounds + slack))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bounds > 0, gaps / bounds, np.where(gaps > slack, np.inf, 0.0))
    i = int(np.argmax(ratio)) if ratio.size else 0
    worst = float(ratio[i]) if ratio.size else 0.0
    return BoundCheck(name, ok, worst, int(ks[i]) if ratio.size else 0, int(ratio.size))


def _slack(f_star):
    return 1e-9 * (1.0 + abs(f_star))


def sublinear_envelope(trace, f_star, sigma, delta=None):
    """``F(x^k) - F* <= 4 mu / k`` for ``k >= 1``.

    ``mu = max((F(x^1) - F*)/4, 2 sigma^2 delta^2)`` with ``delta`` the
    largest distance to the reference minimizer seen in the trace (taken
    from the residual column when not given).
    """
    F = trace.column("objective")
    ks = trace.column("k").astype(int)
    if delta is None:
        if not trace.has_residual:
            raise ValueError("trace has no residual column; pass delta")
        delta = float(np.max(trace.column("residual")))
    mu = max((F[1] - f_star) / 4.0, 2.0 * sigma**2 * delta**2)
    sel = ks >= 1
    return _compare("sublinear 4mu/k", ks[sel], F[sel] - f_star, 4.0 * mu / ks[sel], _slack(f_star))


def fista_envelope(trace, f_star, L, dist0):
    """``F(x^k) - F* <= 2 L ||x^0 - x*||^2 / (k + 1)^2``."""
    F = trace.column("objective")
    ks = trace.column("k").astype(int)
    return _compare("fista 2L/(k+1)^2", ks, F - f_star, 2.0 * L * dist0**2 / (ks + 1.0) ** 2, _slack(f_star))


def accelerated_envelope(trace, f_star, L, dist0, sigma=None, gamma0=None):
    """``F(x^k) - F* <= (gamma0 + L)/2 * 4 sigma/(2 sqrt(sigma) + k sqrt(gamma0))^2 * ||x^0 - x*||^2``.

    With ``sigma = gamma0 = L`` (the default) this is ``4 L ||x^0 - x*||^2 / (2 + k)^2``.
    """
    sigma = L if sigma is None else sigma
    gamma0 = L if gamma0 is None else gamma0
    F = trace.column("objective")
    ks = trace.column("k").astype(int)
    lam_b = 4.0 * sigma / (2.0 * np.sqrt(sigma) + ks * np.sqrt(gamma0)) ** 2
    bound = 0.5 * (gamma0 + L) * lam_b * dist0**2
    return _compare("accelerated O(1/k^2)", ks, F - f_star, bound, _slack(f_star))


def estimate_sequence_chain(trace, f_star, gamma0, dist0):
    """``F(x^k) - F* <= lambda^k [F(x^0) + gamma0/2 ||x^0 - x*||^2 - F*]`` using the recorded ``lambda^k``."""
    F = trace.column("objective")
    ks = trace.column("k").astype(int)
    lam = np.asarray(trace.meta["lambda_seq"], dtype=float)
    bound = lam * (F[0] + 0.5 * gamma0 * dist0**2 - f_star)
    return _compare("estimate-sequence chain", ks, F - f_star, bound, _slack(f_star))


def lambda_recursion(lambda_seq, sigma, gamma0, gamma_seq=None):
    """``lambda^k <= 4 sigma / (2 sqrt(sigma) + k sqrt(gamma0))^2``, and ``gamma0 lambda^k <= gamma^k`` when ``gamma_seq`` is given."""
    lam = np.asarray(lambda_seq, dtype=float)
    ks = np.arange(lam.size)
    bound = 4.0 * sigma / (2.0 * np.sqrt(sigma) + ks * np.sqrt(gamma0)) ** 2
    check = _compare("lambda recursion", ks, lam, bound * (1 + 1e-12), 0.0)
    if gamma_seq is not None:
        gam = np.asarray(gamma_seq, dtype=float)
        prod_ok = bool(np.all(gamma0 * lam <= gam * (1 + 1e-12)))
        check = BoundCheck(check.name, check.ok and prod_ok, check.ratio, check.worst_k, check.checked)
    return check
