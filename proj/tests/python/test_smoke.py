import math
import os

import numpy as np
import pytest

import escn

DATA = os.path.join(os.path.dirname(__file__), "..", "data")


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def test_sh_steerable():
    rng = np.random.default_rng(1)
    r = random_rotation(rng)
    v = rng.normal(size=3)
    v /= np.linalg.norm(v)
    blocks = escn.wigner_d(4, r)
    assert len(blocks) == 5
    y = escn.real_sh(4, v)
    ry = escn.real_sh(4, r @ v)
    for l, d in enumerate(blocks):
        s = slice(l * l, (l + 1) * (l + 1))
        assert np.abs(ry[s] - d @ y[s]).max() < 1e-12
    assert y[0] == pytest.approx(1 / math.sqrt(4 * math.pi))


def test_three_paths_agree():
    rng = np.random.default_rng(2)
    L, C = 4, 3
    x = rng.normal(size=(escn.num_coeffs(L), C))
    h = rng.normal(size=(escn.h_rows(L), C))
    d = rng.normal(size=3)
    ref = escn.naive_conv(x, d, h)
    assert np.abs(escn.aligned_conv(x, d, h) - ref).max() < 1e-11
    ht = escn.h_to_htilde(h, L)
    assert np.abs(escn.so2_conv(x, d, ht) - ref).max() < 1e-11
    assert np.abs(escn.htilde_to_h(ht, L) - h).max() < 1e-11


def test_cg_values():
    assert escn.su2_cg(1, 0, 1, 0, 0, 0) == pytest.approx(-1 / math.sqrt(3))
    assert escn.real_cg(0, 0, 0, 0, 0, 0) == pytest.approx(1.0)


def test_bad_shapes_raise():
    with pytest.raises(ValueError):
        escn.naive_conv(np.zeros((5, 1)), [0, 1, 0], np.zeros((1, 1)))


def test_forward_invariances():
    pos = np.array([[0.0, 0.0, 0.0], [1.0, 0.25, 0.0], [-0.5, 0.75, 0.5]])
    z = [8, 1, 1]
    kw = dict(seed=3, lmax=2, mmax=1, layers=1, channels=8)
    e, f = escn.forward(pos, z, **kw)
    assert f.shape == (3, 3)
    e2, f2 = escn.forward(pos + np.array([2.0, -1.0, 0.5]), z, **kw)
    assert e2 == e and np.array_equal(f2, f)
    r = random_rotation(np.random.default_rng(4))
    e3, f3 = escn.forward(pos @ r.T, z, activation="identity", **kw)
    e4, f4 = escn.forward(pos, z, activation="identity", **kw)
    assert abs(e3 - e4) < 1e-10
    assert np.abs(f3 - f4 @ r.T).max() < 1e-10


def test_harness_reports():
    rep = escn.check_equivalence(lmax=3, trials=5, seed=1, timings=False)
    assert rep["pass"] is True
    text, rep = escn.cgtable(lmax=1)
    assert rep["pass"] and text.startswith("escn-cgtable")
    rep = escn.predict(os.path.join(DATA, "water.xyz"), lmax=2, mmax=1, layers=1, channels=8)
    assert len(rep["results"]["atoms"]) == 3
    with pytest.raises(OSError):
        escn.predict(os.path.join(DATA, "broken.xyz"))


def test_weight_file(tmp_path):
    path = str(tmp_path / "w.bin")
    escn.save_random_weights(path, seed=7, lmax=2, mmax=1, layers=1, channels=8)
    pos = np.array([[0.0, 0.0, 0.0], [1.1, 0.0, 0.0]])
    e, f = escn.forward(pos, [6, 8], weights=path)
    e2, f2 = escn.forward(pos, [6, 8], seed=7, lmax=2, mmax=1, layers=1, channels=8)
    assert e == e2 and np.array_equal(f, f2)
    with open(path, "rb") as fh:
        assert fh.read(8) == b"ESCNW001"
    with pytest.raises(ValueError):
        escn.predict(os.path.join(DATA, "water.xyz"), weights=path, lmax=3)
