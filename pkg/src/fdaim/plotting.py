"""BER-vs-SNR figure rendering (file output only, Agg backend)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .config import SystemConfig  # noqa: E402
from .harness import BerRecord  # noqa: E402

_STYLE = {"ml": dict(marker="o", color="tab:blue"),
          "dblc": dict(marker="s", color="tab:red")}


def plot_ber_curves(records: list[BerRecord], config: SystemConfig,
                    path: str) -> None:
    """Semilog BER curves per detector plus the analytical bound."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    detectors = []
    for r in records:
        if r.detector not in detectors:
            detectors.append(r.detector)
    for det in detectors:
        pts = [(r.snr_db, r.ber_total(config)) for r in records
               if r.detector == det and math.isfinite(r.snr_db)
               and r.ber_total(config) > 0.0]
        if pts:
            xs, ys = zip(*sorted(pts))
            ax.semilogy(xs, ys, label=f"simulated ({det})",
                        linestyle="-", **_STYLE.get(det, {}))
    bound = sorted({(r.snr_db, r.abep) for r in records
                    if math.isfinite(r.snr_db) and math.isfinite(r.abep)})
    if bound:
        xs, ys = zip(*bound)
        ax.semilogy(xs, ys, "k--", label="analytical bound")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("BER")
    ax.set_title(f"N_T={config.n_t}, N={config.n_active}, M={config.m_offsets}, "
                 f"L={config.l_codes}, J={config.j_qam}, N_R={config.n_r}")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
