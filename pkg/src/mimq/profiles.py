"""Built-in codes: the 802.11n n=1296 family, the 5G NR BG2 n=560 code and the
802.3ca degree profile (no matrix shipped for the latter).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .code import (
    DegreeDistribution,
    LayerPlan,
    ParityCheckMatrix,
    QcBaseMatrix,
    base_degree_distributions,
    expand_qc,
    layer_partition,
    parse_qc_table,
)


@dataclass(frozen=True)
class CodeProfile:
    """A named code: degree profile, optional QC base matrix and simulation metadata.

    ``rate`` is the transmitted rate used for Eb/N0 conversion; ``punctured``
    lists the leading VN columns that are never transmitted.
    """

    name: str
    dd: DegreeDistribution
    base: QcBaseMatrix | None
    rate: float
    nb: int
    punctured: int = 0
    lnms_factor: float = 0.8

    def matrix(self) -> ParityCheckMatrix:
        if self.base is None:
            raise ValueError(f"no parity-check matrix shipped for {self.name}")
        return _expanded(self.name)

    def layer_plan(self) -> LayerPlan:
        if self.base is None:
            raise ValueError("layer plan requires QC base matrix")
        return layer_partition(self.base, self.matrix())


_FILES = {
    "802.11n-r12": ("80211n_n1296_r12.qc", 0.5, 0, 0.8),
    "802.11n-r23": ("80211n_n1296_r23.qc", 2 / 3, 0, 0.8),
    "802.11n-r56": ("80211n_n1296_r56.qc", 5 / 6, 0, 0.8),
    "5g-n560": ("5g_bg2_n560.qc", 0.5, 56, 0.7),
}

# degree profile of the 802.3ca (N_b = 69) code, edge perspective
_IEEE8023CA = {
    "rho": {22: 0.0800, 23: 0.9200},
    "theta": {3: 0.5455, 4: 0.3709, 11: 0.0400, 12: 0.0436},
}

PROFILE_NAMES = tuple(_FILES) + ("802.3ca",)


def load_base(filename: str) -> QcBaseMatrix:
    text = resources.files("mimq").joinpath("data", filename).read_text()
    return parse_qc_table(text)


@lru_cache(maxsize=None)
def _expanded(name: str) -> ParityCheckMatrix:
    return expand_qc(get_profile(name).base)


@lru_cache(maxsize=None)
def get_profile(name: str) -> CodeProfile:
    if name in _FILES:
        fname, rate, punct, factor = _FILES[name]
        base = load_base(fname)
        return CodeProfile(name, base_degree_distributions(base), base, rate, base.nb,
                           punct, factor)
    if name == "802.3ca":
        dd = DegreeDistribution.from_fractions(_IEEE8023CA["rho"], _IEEE8023CA["theta"])
        return CodeProfile(name, dd, None, 0.8261, 69, 0, 0.65)
    raise KeyError(f"unknown profile {name!r}; choose from {', '.join(PROFILE_NAMES)}")
