"""Equivariant convolutions on spherical-harmonic features.

Coefficient arrays have (L+1)^2 rows in (l, m) order and one column per
channel. The harness functions return parsed JSON reports.
"""

import json as _json

from . import _core
from ._core import (
    ConfigError,
    DomainError,
    InputError,
    align_to_y,
    aligned_conv,
    atomic_number,
    forward,
    h_index,
    h_rows,
    h_to_htilde,
    htilde_to_h,
    lm_index,
    naive_conv,
    num_coeffs,
    real_cg,
    real_sh,
    rotate,
    save_random_weights,
    so2_conv,
    su2_cg,
    wigner_d,
)


def check_equivalence(**kwargs):
    return _json.loads(_core.check_equivalence(**kwargs))


def check_equivariance(**kwargs):
    return _json.loads(_core.check_equivariance(**kwargs))


def bench(**kwargs):
    return _json.loads(_core.bench(**kwargs))


def predict(input, **kwargs):
    return _json.loads(_core.predict(input, **kwargs))


def cgtable(**kwargs):
    """Returns (table_text, report)."""
    text, report = _core.cgtable(**kwargs)
    return text, _json.loads(report)
