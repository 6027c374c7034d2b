"""Time-evolving block decimation on matrix product states."""

from __future__ import annotations

import warnings

import numpy as np

from ..model import HamiltonianTerms
from .gates import TrotterGateLayer, trotter_layer
from .mps import MatrixProductState, TruncationPolicy


class TruncationWarning(RuntimeWarning):
    """Bond dimension hit ``chi_max`` and weight above the cutoff was discarded."""


def apply_layer(
    state: MatrixProductState, layer: TrotterGateLayer, policy: TruncationPolicy
) -> float:
    """Apply one Trotter step in place; returns the discarded weight of the step.

    Consecutive gates are swept in the direction the bond index moves, so the
    orthogonality center only ever walks one site between gates.
    """
    gates = layer.gates
    if state.center is None:
        state.canonicalize(0)
    discarded = 0.0
    for k, g in enumerate(gates):
        if not g.is_two_site:
            state.apply_one_site(g.matrix, g.sites[0])
            continue
        i = g.sites[0]
        nxt = next((h.sites[0] for h in gates[k + 1 :] if h.is_two_site), None)
        move = "left" if nxt is not None and nxt < i else "right"
        discarded += state.apply_two_site(g.matrix, i, policy, move=move)
    return discarded


def tebd_evolve(
    state: MatrixProductState,
    terms: HamiltonianTerms,
    dt: float,
    n_steps: int,
    policy: TruncationPolicy | None = None,
    ordering: str = "even-odd",
    order: int = 1,
    observer=None,
) -> MatrixProductState:
    """Evolve ``state`` by ``n_steps`` Trotter steps of size ``dt``.

    Parameters
    ----------
    observer : callable, optional
        Called as ``observer(step_index, state)`` after every step (step
        index starts at 1), e.g. to record magnetizations on a time grid.

    Returns a new state; the cumulative discarded weight is in
    ``result.log.total`` and the per-step weights in ``result.step_discarded``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if state.N != terms.N:
        raise ValueError("state and Hamiltonian sizes differ")
    policy = policy or TruncationPolicy()
    layer = trotter_layer(terms, dt, ordering=ordering, order=order)
    psi = state.copy()
    psi.step_discarded = []
    for step in range(1, int(n_steps) + 1):
        psi.step_discarded.append(apply_layer(psi, layer, policy))
        if observer is not None:
            observer(step, psi)
    if psi.log.saturated:
        warnings.warn(
            f"chi_max={policy.chi_max} reached {psi.log.saturated} times; "
            f"total discarded weight {psi.log.total:.3e}",
            TruncationWarning,
            stacklevel=2,
        )
    return psi


def magnetization_trajectory(
    state: MatrixProductState,
    terms: HamiltonianTerms,
    dt: float,
    n_steps: int,
    sample_every: int = 1,
    policy: TruncationPolicy | None = None,
    ordering: str = "even-odd",
    order: int = 1,
    axis: str = "z",
):
    """Site magnetizations along a TEBD run.

    Returns ``(times, values)`` with ``values`` of shape ``(len(times), N)``;
    the initial state is included at ``t = 0``.
    """
    from ..exact import PAULI

    op = PAULI[axis]
    times = [0.0]
    rows = [np.real(state.copy().local_expectations(op))]

    def observe(step, psi):
        if step % sample_every == 0:
            times.append(step * dt)
            rows.append(np.real(psi.local_expectations(op)))

    tebd_evolve(state, terms, dt, n_steps, policy, ordering, order, observer=observe)
    return np.array(times), np.array(rows)
