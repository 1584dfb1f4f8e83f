"""Refractive-index dispersion models (Sellmeier form).

Coefficient sets live in ``data/materials.json`` so materials can be added
without touching code.  The Sellmeier form used is

    n^2(lambda) = 1 + sum_i b_i * lambda^2 / (lambda^2 - lambda_i^2)

with lambda in µm; derivatives with respect to angular frequency come from
analytic differentiation plus the chain rule.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import ConfigError, MaterialWindowError
from .units import C_M_PER_S, TWO_PI


@dataclass(frozen=True)
class Material:
    name: str
    b: tuple
    resonance_um: tuple
    window_um: tuple

    def check_window(self, omega):
        lam_um = wavelength_um(omega)
        lo, hi = self.window_um
        if np.any(lam_um < lo) or np.any(lam_um > hi):
            raise MaterialWindowError(
                f"{self.name}: wavelength {np.min(lam_um):.3g}-{np.max(lam_um):.3g} µm "
                f"outside validity window [{lo}, {hi}] µm"
            )


def wavelength_um(omega):
    return TWO_PI * C_M_PER_S / np.asarray(omega, dtype=float) * 1e6


_REGISTRY: dict[str, Material] = {}


def _load_registry() -> dict[str, Material]:
    if not _REGISTRY:
        text = resources.files("qoctsim.data").joinpath("materials.json").read_text()
        for name, spec in json.loads(text).items():
            _REGISTRY[name] = Material(
                name=name,
                b=tuple(spec["b"]),
                resonance_um=tuple(spec["resonance_um"]),
                window_um=tuple(spec["window_um"]),
            )
    return _REGISTRY


def get_material(name: str) -> Material:
    reg = _load_registry()
    if name not in reg:
        raise ConfigError(f"unknown material {name!r}; known: {sorted(reg)}")
    return reg[name]


def _n_squared_and_dlambda(mat: Material, lam_um):
    """Return (n^2, d(n^2)/dlambda in 1/µm) at the given wavelengths (µm)."""
    lam2 = lam_um**2
    n2 = np.ones_like(lam_um)
    dn2 = np.zeros_like(lam_um)
    for b, lr in zip(mat.b, mat.resonance_um):
        c = lr**2
        denom = lam2 - c
        n2 = n2 + b * lam2 / denom
        dn2 = dn2 + (-2.0 * b * c * lam_um) / denom**2
    return n2, dn2


def sellmeier_index(material, omega):
    """Refractive index at angular frequency ``omega`` (rad/s).

    Raises MaterialWindowError outside the model's validity window.
    """
    mat = material if isinstance(material, Material) else get_material(material)
    omega = np.asarray(omega, dtype=float)
    mat.check_window(omega)
    lam_um = wavelength_um(omega)
    n2, _ = _n_squared_and_dlambda(mat, lam_um)
    return np.sqrt(n2)


def sellmeier_dn_domega(material, omega):
    """Analytic dn/domega (seconds) at angular frequency ``omega``."""
    mat = material if isinstance(material, Material) else get_material(material)
    omega = np.asarray(omega, dtype=float)
    mat.check_window(omega)
    lam_um = wavelength_um(omega)
    n2, dn2_dlam = _n_squared_and_dlambda(mat, lam_um)
    n = np.sqrt(n2)
    dn_dlam_per_m = dn2_dlam / (2.0 * n) * 1e6
    lam_m = lam_um * 1e-6
    return -(lam_m**2) / (TWO_PI * C_M_PER_S) * dn_dlam_per_m
