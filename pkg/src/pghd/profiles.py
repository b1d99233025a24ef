"""Named analytic and random profiles for T*, Q and the initial anomaly.

Profile strings:
  zero | const(c) | file:<path> | gyre | mode(k,l,m) | random(seed, amplitude, passes)
  | random (seed from the config) | baroclinic(amplitude, seed)
``gyre`` is T* = cos(pi y / Ly), the single-gyre surface forcing.
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import Optional

import numpy as np

from .fields import Grid, ScalarField2, ScalarField3

_CALL = re.compile(r"^([a-z_]+)\s*(?:\((.*)\))?$")
_ARITY = {"zero": (0, 0), "gyre": (0, 0), "const": (1, 1), "mode": (3, 3),
          "random": (0, 3), "baroclinic": (1, 2)}


class ProfileError(ValueError):
    pass


def _split(spec: str):
    spec = spec.strip()
    if spec.startswith("file:"):
        path = spec[5:].strip()
        if not path:
            raise ProfileError("file: needs a path")
        return "file", [path]
    m = _CALL.match(spec)
    if not m or m.group(1) not in _ARITY:
        raise ProfileError(f"unknown profile {spec!r}")
    name, argtxt = m.group(1), m.group(2)
    args = [a.strip() for a in argtxt.split(",")] if argtxt and argtxt.strip() else []
    lo, hi = _ARITY[name]
    if not lo <= len(args) <= hi:
        raise ProfileError(f"{name} takes {lo}..{hi} arguments (got {len(args)})")
    try:
        nums = [float(a) for a in args]
    except ValueError as exc:
        raise ProfileError(f"non-numeric argument in {spec!r}") from exc
    return name, nums


def check_profile(spec: str, kind: str) -> None:
    """Syntax check only; files are read when the profile is built."""
    name, args = _split(spec)
    if name == "mode" and any(a != int(a) or a < 0 for a in args):
        raise ProfileError("mode indices must be non-negative integers")
    if name == "random" and args and args[0] != int(args[0]):
        raise ProfileError("random seed must be an integer")
    if name == "random" and len(args) >= 3 and (args[2] < 0 or args[2] != int(args[2])):
        raise ProfileError("smoothing passes must be a non-negative integer")
    if name == "baroclinic" and kind == "surface":
        raise ProfileError("baroclinic is a volume profile")


def smooth(a: np.ndarray, passes: int, periodic: bool) -> np.ndarray:
    """Repeated 1-2-1 filtering along every axis (vertical edges replicated)."""
    out = np.array(a, dtype=float)
    for _ in range(int(passes)):
        for ax in range(out.ndim):
            wrap = periodic and ax < 2
            pad = [(0, 0)] * out.ndim
            pad[ax] = (1, 1)
            p = np.pad(out, pad, mode="wrap" if wrap else "edge")
            lo = np.take(p, np.arange(0, out.shape[ax]), axis=ax)
            hi = np.take(p, np.arange(2, out.shape[ax] + 2), axis=ax)
            out = 0.25 * lo + 0.5 * out + 0.25 * hi
    return out


def _random(grid: Grid, shape, seed, amplitude, passes):
    rng = np.random.default_rng(int(seed))
    a = smooth(rng.standard_normal(shape), passes, grid.periodic)
    a -= a.mean()
    rms = np.sqrt(np.mean(a * a))
    return amplitude * a / rms if rms > 0 else a


def _mode_factor(grid: Grid, k, l):
    X, Y = grid.mesh2()
    s = 2.0 if grid.periodic else 1.0
    return np.cos(s * k * np.pi * X / grid.Lx) * np.cos(s * l * np.pi * Y / grid.Ly)


def _load(path: str, base: Optional[str], grid: Grid, surface: bool):
    from .snapshot import read_snapshot

    p = Path(path)
    if not p.is_absolute() and base:
        p = Path(base) / p
    if surface:
        # a surface field is stored as a snapshot; its top level is used
        fld = read_snapshot(p)
        if fld.grid.shape[:2] != grid.shape[:2]:
            raise ProfileError(f"{p}: horizontal size {fld.grid.shape[:2]} does not match {grid.shape[:2]}")
        return fld.values[:, :, -1].copy()
    return read_snapshot(p, grid).values


def surface_profile(spec: str, grid: Grid, base: Optional[str] = None) -> Optional[ScalarField2]:
    """Build T*; ``None`` for the zero profile."""
    name, args = _split(spec)
    X, Y = grid.mesh2()
    if name == "zero":
        return None
    if name == "const":
        vals = np.full(X.shape, args[0])
    elif name == "gyre":
        vals = np.cos(np.pi * Y / grid.Ly)
    elif name == "mode":
        vals = _mode_factor(grid, args[0], args[1]) * np.cos(args[2] * np.pi)
    elif name == "random":
        seed, amp, passes = (args + [0, 1.0, 2][len(args):])[:3]
        vals = _random(grid, X.shape, seed, amp, passes)
    elif name == "file":
        vals = _load(args[0], base, grid, True)
    else:
        raise ProfileError(f"{name} is not a surface profile")
    return ScalarField2(grid, vals)


def volume_profile(spec: str, grid: Grid, seed: Optional[int] = None,
                   base: Optional[str] = None) -> Optional[ScalarField3]:
    """Build a 3-D field (Q or the initial anomaly); ``None`` for zero."""
    name, args = _split(spec)
    X, Y, Z = grid.mesh()
    zeta = (Z + grid.h) / grid.h
    if name == "zero":
        return None
    if name == "const":
        vals = np.full(grid.shape, args[0])
    elif name == "gyre":
        vals = np.broadcast_to(np.cos(np.pi * Y / grid.Ly), grid.shape).copy()
    elif name == "mode":
        vals = _mode_factor(grid, args[0], args[1])[..., None] * np.cos(args[2] * np.pi * zeta)
    elif name == "random":
        if args:
            seed_, amp, passes = (args + [0, 1.0, 2][len(args):])[:3]
        else:
            if seed is None:
                raise ProfileError("random needs a seed")
            seed_, amp, passes = seed, 1.0, 2
        vals = _random(grid, grid.shape, seed_, amp, passes)
    elif name == "baroclinic":
        amp = args[0]
        s = int(args[1]) if len(args) > 1 else (seed if seed is not None else 0)
        vals = baroclinic_state(grid, amp, s)
    elif name == "file":
        vals = _load(args[0], base, grid, False)
    else:
        raise ProfileError(f"unknown profile {name!r}")
    return ScalarField3(grid, vals)


def baroclinic_state(grid: Grid, amplitude: float, seed: int) -> np.ndarray:
    """Sloping isotherms (a meridional front tilted with depth) plus small noise."""
    X, Y, Z = grid.mesh()
    zeta = (Z + grid.h) / grid.h
    front = np.cos(np.pi * Y / grid.Ly) * np.cos(np.pi * zeta)
    noise = _random(grid, grid.shape, seed, 0.05, 1)
    return amplitude * (front + noise)
