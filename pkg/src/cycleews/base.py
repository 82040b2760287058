"""Estimator parameter plumbing and input validation helpers."""

from __future__ import annotations

import inspect

import numpy as np


class ParamsMixin:
    """scikit-learn style get_params/set_params based on __init__ keywords.

    Keeps the estimators in this package composable with sklearn
    pipelines and clone() without depending on sklearn itself.
    """

    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [
            name
            for name, p in sig.parameters.items()
            if name != "self" and p.kind not in (p.VAR_POSITIONAL, p.VAR_KEYWORD)
        ]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for name, value in params.items():
            if name not in valid:
                raise ValueError(f"unknown parameter {name!r} for {type(self).__name__}")
            setattr(self, name, value)
        return self

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"


def require(condition: bool, message: str) -> None:
    if not condition:
        raise ValueError(message)


def as_float_1d(x, name: str = "array") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    require(arr.ndim == 1, f"{name} must be 1-dimensional")
    return arr


def as_float_2d(x, name: str = "array") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    require(arr.ndim == 2, f"{name} must be 2-dimensional")
    return arr


def check_finite(arr: np.ndarray, name: str = "array") -> np.ndarray:
    require(bool(np.isfinite(arr).all()), f"{name} contains non-finite values")
    return arr
