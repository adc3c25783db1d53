"""Parameter labels and the label-addressed symmetric matrix."""

from __future__ import annotations

from typing import Hashable, Iterable, NamedTuple, Sequence

import numpy as np

KINDS = ("theta_ru", "phi_ru", "theta_tl", "phi_tl", "theta_rl", "phi_rl",
         "theta_tu", "phi_tu", "tau", "beta_re", "beta_im")
LOS_KINDS = ("theta_ru", "phi_ru", "theta_tu", "phi_tu", "tau", "beta_re", "beta_im")
GEOMETRIC_KINDS = KINDS[:9]
# reduced parameterization: the angles of incidence are dropped
REDUCED_KINDS = ("theta_ru", "phi_ru", "theta_tl", "phi_tl", "theta_tu", "phi_tu", "tau")
RIS_ANGLE_KINDS = ("theta_tl", "phi_tl", "theta_rl", "phi_rl")
BETA_KINDS = ("beta_re", "beta_im")


class ParamLabel(NamedTuple):
    kind: str
    path: int  # 0 = LOS, 1..M1 = RIS paths

    def __str__(self):
        return f"{self.kind}[{self.path}]"


def eta_labels(m1: int, kinds: Sequence[str] = KINDS) -> list[ParamLabel]:
    """RIS-path labels, kind-major: all paths of a kind before the next kind."""
    return [ParamLabel(k, m) for k in kinds for m in range(1, m1 + 1)]


def psi_labels(kinds: Sequence[str] = LOS_KINDS) -> list[ParamLabel]:
    return [ParamLabel(k, 0) for k in kinds if k in LOS_KINDS]


def zeta_labels(m1: int, include_los: bool, kinds: Sequence[str] = KINDS) -> list[ParamLabel]:
    return (psi_labels(kinds) if include_los else []) + eta_labels(m1, kinds)


def label_values(labels: Iterable[ParamLabel], paths) -> np.ndarray:
    """True parameter values for ``labels`` given ``paths[i]`` = PathParams of path i."""
    out = []
    for lab in labels:
        p = paths[lab.path]
        if lab.kind == "beta_re":
            out.append(p.beta.real)
        elif lab.kind == "beta_im":
            out.append(p.beta.imag)
        else:
            v = getattr(p, lab.kind)
            if v is None:
                raise ValueError(f"{lab} is not defined on the LOS path")
            out.append(v)
    return np.array(out, dtype=float)


class LabeledMatrix:
    """Real symmetric matrix with labeled rows/columns.  Immutable."""

    __slots__ = ("labels", "values", "_index")

    def __init__(self, labels: Iterable[Hashable], values, symmetrize: bool = True):
        labels = tuple(labels)
        v = np.array(values, dtype=float)
        if v.shape != (len(labels), len(labels)):
            raise ValueError(f"{len(labels)} labels for a {v.shape} matrix")
        index = {lab: i for i, lab in enumerate(labels)}
        if len(index) != len(labels):
            raise ValueError("duplicate labels")
        if symmetrize:
            v = (v + v.T) / 2
        v.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "_index", index)

    def __setattr__(self, name, value):
        raise AttributeError("LabeledMatrix is immutable")

    def __len__(self):
        return len(self.labels)

    def __contains__(self, label):
        return label in self._index

    def __repr__(self):
        return f"LabeledMatrix({len(self)} labels)"

    def index(self, labels: Iterable[Hashable]) -> np.ndarray:
        try:
            return np.array([self._index[lab] for lab in labels], dtype=int)
        except KeyError as exc:
            raise KeyError(f"label {exc.args[0]} not present") from None

    def block(self, rows: Iterable[Hashable], cols: Iterable[Hashable]) -> np.ndarray:
        return self.values[np.ix_(self.index(rows), self.index(cols))]

    def sub(self, labels: Iterable[Hashable]) -> "LabeledMatrix":
        labels = list(labels)
        return LabeledMatrix(labels, self.block(labels, labels), symmetrize=False)

    def select(self, kinds: Iterable[str] | None = None, paths: Iterable[int] | None = None):
        """Labels in matrix order filtered by kind and/or path."""
        kinds = None if kinds is None else set(kinds)
        paths = None if paths is None else set(paths)
        return [lab for lab in self.labels
                if (kinds is None or lab.kind in kinds)
                and (paths is None or getattr(lab, "path", None) in paths)]

    def kind_block(self, row_kind: str, col_kind: str) -> np.ndarray:
        return self.block(self.select([row_kind]), self.select([col_kind]))

    def __add__(self, other: "LabeledMatrix") -> "LabeledMatrix":
        if set(other.labels) - set(self.labels):
            raise ValueError("cannot add a matrix with foreign labels")
        out = self.values.copy()
        idx = self.index(other.labels)
        out[np.ix_(idx, idx)] += other.values
        return LabeledMatrix(self.labels, out, symmetrize=False)

    def scaled(self, factor: float) -> "LabeledMatrix":
        return LabeledMatrix(self.labels, self.values * factor, symmetrize=False)
