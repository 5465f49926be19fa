#pragma once

#include <string>

// Generated matplotlib scripts. Each reads the CSV written next to it.

namespace rsslim::plots {

inline std::string crlb_curve(double wavelength) {
    return R"py(#!/usr/bin/env python3
# RMSE lower bounds versus number of perimeter measurements.
import csv, sys
import matplotlib.pyplot as plt

WAVELENGTH = )py" + std::to_string(wavelength) +
           R"py(
rows = list(csv.DictReader(open("crlb_curve.csv")))
n = [int(r["n"]) for r in rows]
indep = [float(r["rmse_indep_m"]) for r in rows]
bien = [float(r["rmse_bienayme_m"]) for r in rows]
corr = [(int(r["n"]), float(r["rmse_corr_m"])) for r in rows if r["rmse_corr_m"]]

fig, ax = plt.subplots(figsize=(6, 4.5))
ax.loglog(n, indep, "g-", label="CRLB, independent noise")
ax.loglog(n, bien, "b-", label="Bienaymé-corrected bound")
if corr:
    ax.loglog([c[0] for c in corr], [c[1] for c in corr], "b^", label="CRLB, correlated noise")
ax.axhline(WAVELENGTH / 2, color="k", ls=":", label="λ/2")
ax.set_xlabel("number of RSS measurements over space")
ax.set_ylabel("RMSE [m]")
ax.grid(True, which="both", alpha=0.3)
ax.legend()
fig.tight_layout()
fig.savefig(sys.argv[1] if len(sys.argv) > 1 else "crlb_curve.png", dpi=150)
)py";
}

inline std::string covariance(double wavelength) {
    return R"py(#!/usr/bin/env python3
# Spatial cross-covariance of residuals versus separation in wavelengths.
import csv, sys
import matplotlib.pyplot as plt

WAVELENGTH = )py" + std::to_string(wavelength) +
           R"py(
rows = [r for r in csv.DictReader(open("corr.csv")) if r["correlation"]]
sep = [float(r["sep_m"]) / WAVELENGTH for r in rows]
rho = [float(r["correlation"]) for r in rows]

fig, ax = plt.subplots(figsize=(6, 4.5))
ax.plot(sep, rho, "k-", label="normalized cross-covariance")
ax.axvline(0.5, color="r", ls=":", label="λ/2")
ax.set_xlabel("correlation distance [wavelengths]")
ax.set_ylabel("normalized covariance")
ax.grid(True, alpha=0.3)
ax.legend()
fig.tight_layout()
fig.savefig(sys.argv[1] if len(sys.argv) > 1 else "corr.png", dpi=150)
)py";
}

inline std::string spectrum(double wavelength) {
    return R"py(#!/usr/bin/env python3
# Spatial power spectrum of the residual cross-covariance.
import csv, math, sys
import matplotlib.pyplot as plt

WAVELENGTH = )py" + std::to_string(wavelength) +
           R"py(
rows = list(csv.DictReader(open("spectrum.csv")))
k = [float(r["k_rad_per_m"]) for r in rows]
p = [float(r["power_norm"]) for r in rows]
cutoff = 2 * math.pi / (WAVELENGTH / 2)

fig, ax = plt.subplots(figsize=(6, 4.5))
ax.plot(k, p, "k-")
ax.axvline(cutoff, color="k", ls="-", lw=0.8, label="k = 2π/(λ/2)")
ax.set_xlim(0, 2 * cutoff)
ax.set_xlabel("spatial frequency k [rad/m]")
ax.set_ylabel("normalized power")
ax.grid(True, alpha=0.3)
ax.legend()
fig.tight_layout()
fig.savefig(sys.argv[1] if len(sys.argv) > 1 else "spectrum.png", dpi=150)
)py";
}

inline std::string monte_carlo(double wavelength) {
    return R"py(#!/usr/bin/env python3
# Simulated RMSE and reference bound versus measurement density.
import csv, json, sys
import matplotlib.pyplot as plt

WAVELENGTH = )py" + std::to_string(wavelength) +
           R"py(
rows = list(csv.DictReader(open("mc_summary.csv")))
densities = json.load(open("mc_summary.csv.meta.json"))["densities"]
rmse = [float(r["rmse_m"]) for r in rows]
bound = [float(r["crlb_m"]) for r in rows]

fig, ax = plt.subplots(figsize=(6, 4.5))
ax.semilogx(densities, rmse, "ro-", label="simulated RMSE")
ax.semilogx(densities, bound, "b-", label="reference bound")
ax.axhline(WAVELENGTH / 2, color="k", ls=":", label="λ/2")
ax.axvline(2.0, color="k", ls=":", lw=0.8)
ax.set_xlabel("RSS measurements per wavelength")
ax.set_ylabel("RMSE [m]")
ax.grid(True, which="both", alpha=0.3)
ax.legend()
fig.tight_layout()
fig.savefig(sys.argv[1] if len(sys.argv) > 1 else "mc_study.png", dpi=150)
)py";
}

}  // namespace rsslim::plots
