"""System configuration and index bit budget.

The transmitted bit vector splits into five fields:

* spatial bits        p_s = floor(log2 C(N_T, N))   -- which N of N_T antennas
* offset-combo bits   p_f = floor(log2 C(M, N))     -- which N of M frequency offsets
* realign bits        p_r = floor(log2 N!)          -- permutation of offsets over antennas
* symbol bits         p_m = N * log2(J)             -- one J-QAM symbol per active antenna
* code bits           p_c = 2N * log2(L)            -- I/Q Walsh code index per antenna
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields

SPEED_OF_LIGHT = 299_792_458.0


class ConfigError(ValueError):
    """Invalid system parameters or malformed config document."""


def _is_pow2(x: int) -> bool:
    return x >= 1 and (x & (x - 1)) == 0


@dataclass(frozen=True)
class BitBudget:
    p_s: int
    p_f: int
    p_r: int
    p_m: int
    p_c: int

    @property
    def p_total(self) -> int:
        return self.p_s + self.p_f + self.p_r + self.p_m + self.p_c

    def as_tuple(self) -> tuple[int, int, int, int, int]:
        return (self.p_s, self.p_f, self.p_r, self.p_m, self.p_c)


def derive_bit_budget(n_t: int, n_active: int, m_offsets: int,
                      l_codes: int, j_qam: int) -> BitBudget:
    """Per-field index bit widths for one transmission interval."""
    if n_active <= 1:
        raise ConfigError(f"need more than one active antenna, got N={n_active}")
    if n_active > n_t:
        raise ConfigError(f"N={n_active} exceeds N_T={n_t}")
    if n_active > m_offsets:
        raise ConfigError(f"N={n_active} exceeds offset pool size M={m_offsets}")
    if not _is_pow2(l_codes):
        raise ConfigError(f"L={l_codes} is not a power of two")
    if not _is_pow2(j_qam):
        raise ConfigError(f"J={j_qam} is not a power of two")
    return BitBudget(
        p_s=int(math.log2(math.comb(n_t, n_active))),
        p_f=int(math.log2(math.comb(m_offsets, n_active))),
        p_r=int(math.log2(math.factorial(n_active))),
        p_m=n_active * int(math.log2(j_qam)),
        p_c=2 * n_active * int(math.log2(l_codes)),
    )


@dataclass(frozen=True)
class SystemConfig:
    """All scheme parameters plus the derived bit budget.

    ``rail_coupling`` selects how the I/Q rails pass through the complex
    channel: "separated" keeps the in-phase rail on the real channel part
    and the quadrature rail on the imaginary part (the model the despread
    receiver assumes, exact in the noise-free limit), "complex" forms the
    full complex product (which leaks each rail into the other).
    """

    n_t: int
    n_active: int
    m_offsets: int
    l_codes: int
    j_qam: int
    n_r: int = 2
    k_chips: int | None = None
    ps_power: float = 1.0
    n0: float = 1.0
    sigma2: float = 1.0
    f0: float = 3.0e9
    delta_f: float = 20.0e3
    range_m: float = 300.0
    theta_rad: float = math.pi / 3.0
    d_spacing: float | None = None
    phase_mode: str = "absorbed"
    rail_coupling: str = "separated"
    budget: BitBudget = field(init=False, repr=False)

    def __post_init__(self):
        budget = derive_bit_budget(self.n_t, self.n_active, self.m_offsets,
                                   self.l_codes, self.j_qam)
        object.__setattr__(self, "budget", budget)
        if self.k_chips is None:
            # Smallest power-of-two chip count that fits one orthogonal
            # column per (antenna, code) pair.
            need = self.l_codes * self.n_t
            object.__setattr__(self, "k_chips", 1 << (need - 1).bit_length())
        if self.d_spacing is None:
            object.__setattr__(self, "d_spacing", SPEED_OF_LIGHT / (2.0 * self.f0))
        if not _is_pow2(self.k_chips):
            raise ConfigError(f"K={self.k_chips} is not a power of two")
        if self.k_chips < self.l_codes * self.n_t:
            raise ConfigError(
                f"K={self.k_chips} < L*N_T={self.l_codes * self.n_t}: the despread "
                "bank needs one orthogonal column per (antenna, code) pair")
        if self.n_r < 1:
            raise ConfigError(f"N_R={self.n_r} must be positive")
        if self.phase_mode not in ("absorbed", "explicit"):
            raise ConfigError(f"unknown phase_mode {self.phase_mode!r}")
        if self.rail_coupling not in ("separated", "complex"):
            raise ConfigError(f"unknown rail_coupling {self.rail_coupling!r}")
        if self.ps_power < 0 or self.n0 < 0 or self.sigma2 < 0:
            raise ConfigError("powers and channel variance must be nonnegative")
        if self.delta_f <= 0:
            raise ConfigError("delta_f must be positive")

    # -- derived quantities ------------------------------------------------

    @property
    def p_s(self) -> int:
        return self.budget.p_s

    @property
    def p_f(self) -> int:
        return self.budget.p_f

    @property
    def p_r(self) -> int:
        return self.budget.p_r

    @property
    def p_m(self) -> int:
        return self.budget.p_m

    @property
    def p_c(self) -> int:
        return self.budget.p_c

    @property
    def p_total(self) -> int:
        return self.budget.p_total

    @property
    def chip_duration(self) -> float:
        # T_c = 1/delta_f keeps every offset difference orthogonal over a chip.
        return 1.0 / self.delta_f

    def offset_hz(self, m: int) -> float:
        """Frequency offset of pool entry m (1-based), linear increment."""
        return m * self.delta_f

    def noise_power(self, snr_db: float) -> float:
        """Total noise power N_0 from SNR(dB) = 10 log10(P_S^2 / N_0)."""
        if math.isinf(snr_db):
            return 0.0
        return self.ps_power ** 2 * 10.0 ** (-snr_db / 10.0)


def config_from_dict(doc: dict) -> SystemConfig:
    """Build a SystemConfig from a JSON-style mapping; unknown keys rejected."""
    known = {f.name for f in fields(SystemConfig) if f.init}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return SystemConfig(**doc)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str) -> SystemConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must contain a JSON object")
    return config_from_dict(doc)


def default_config(**overrides) -> SystemConfig:
    """The shipped default parameter set (N_T=4, N=2, M=8, L=8, J=8)."""
    base = dict(n_t=4, n_active=2, m_offsets=8, l_codes=8, j_qam=8, n_r=2)
    base.update(overrides)
    return SystemConfig(**base)


def small_config(**overrides) -> SystemConfig:
    """Smallest nondegenerate setup (p_total = 7); ML enumeration is cheap here."""
    base = dict(n_t=2, n_active=2, m_offsets=2, l_codes=2, j_qam=2, n_r=2)
    base.update(overrides)
    return SystemConfig(**base)
