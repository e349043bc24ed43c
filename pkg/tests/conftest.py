import numpy as np
import pytest

from nullwave.nullform import MINKOWSKI, NullFormTensor, QuasiNullForm, lift_quasi, symmetrize


def random_lorentz(rng) -> np.ndarray:
    """Random boost composed with a random rotation; preserves diag(1, -1, -1)."""
    phi = rng.uniform(0, 2 * np.pi)
    rot = np.array([[1, 0, 0], [0, np.cos(phi), -np.sin(phi)], [0, np.sin(phi), np.cos(phi)]])
    b = rng.uniform(-1.5, 1.5)
    boost = np.array([[np.cosh(b), np.sinh(b), 0], [np.sinh(b), np.cosh(b), 0], [0, 0, 1]])
    return boost @ rot


def random_null_quasi(rng) -> QuasiNullForm:
    lam = random_lorentz(rng)
    m = rng.normal() * lam.T @ MINKOWSKI @ lam
    return QuasiNullForm(rng.normal(size=3), 0.5 * (m + m.T))


def random_null_tensor(rng, terms: int = 2) -> NullFormTensor:
    """Symmetrized sum of lifted null quasilinear forms."""
    c = sum(lift_quasi(random_null_quasi(rng)).coeffs for _ in range(terms))
    return symmetrize(NullFormTensor(c))


def random_symmetric(rng, size=3) -> np.ndarray:
    h = rng.normal(size=(size, size))
    return h + h.T


def symbol_dense(n: NullFormTensor, count: int = 720) -> np.ndarray:
    theta = 2 * np.pi * np.arange(count) / count
    x = np.stack([np.ones(count), np.cos(theta), np.sin(theta)])
    return np.einsum("abmn,ak,bk,mk,nk->k", n.coeffs, x, x, x, x)


def dense_null_oracle(n: NullFormTensor, tol: float = 1e-10) -> bool:
    return bool(np.max(np.abs(symbol_dense(n))) <= tol * n.scale)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


# --- shared acceptance run and per-criterion reporting ------------------------

_VERDICTS: list[str] = []


def record_verdict(label: str, ok: bool, detail: str) -> None:
    _VERDICTS.append(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def null_run(tmp_path_factory):
    """The prototype run at the acceptance configuration, written to disk once."""
    from nullwave.experiment import ScenarioConfig, run

    out = tmp_path_factory.mktemp("null_run") / "prototype.csv"
    cfg = ScenarioConfig(scenario="prototype_null", grid_n=256, half_width=20 * np.pi,
                         amplitude=0.01, t_end=40.0, output_path=str(out))
    summary = run(cfg)
    return cfg, summary, out.read_bytes()
