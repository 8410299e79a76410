"""Data model for treatment/outcome samples, CSV ingestion, and fold splitting.

Two datasets drive every analysis in this package: a small dataset assumed
unconfounded and a large auxiliary dataset that may carry hidden confounding.
Both share the same record layout (covariates, binary treatment, real outcome);
the small one may additionally carry known per-sample treatment probabilities
when it comes from a randomized experiment.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, CsvParseError, SchemaError


class DatasetRole(enum.Enum):
    SMALL_UNCONFOUNDED = "small_unconfounded"
    LARGE_AUXILIARY = "large_auxiliary"


@dataclass(frozen=True)
class Sample:
    """One unit: covariate vector, binary treatment, real outcome."""

    covariates: tuple[float, ...]
    treatment: int
    outcome: float

    def __post_init__(self):
        if self.treatment not in (0, 1):
            raise ConfigurationError(f"treatment must be 0 or 1, got {self.treatment}")
        if not all(math.isfinite(c) for c in self.covariates):
            raise ConfigurationError("covariates must all be finite")
        if not math.isfinite(self.outcome):
            raise ConfigurationError("outcome must be finite")


@dataclass(frozen=True)
class Dataset:
    """Ordered collection of samples with a role and optional known propensities.

    Immutable after construction; safe to share across parallel workers.
    """

    samples: tuple[Sample, ...]
    role: DatasetRole = DatasetRole.SMALL_UNCONFOUNDED
    known_propensity: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.samples:
            raise ConfigurationError("dataset must contain at least one sample")
        q = len(self.samples[0].covariates)
        for i, s in enumerate(self.samples):
            if len(s.covariates) != q:
                raise ConfigurationError(
                    f"sample {i} has {len(s.covariates)} covariates, expected {q}"
                )
        if self.known_propensity is not None:
            if len(self.known_propensity) != len(self.samples):
                raise ConfigurationError(
                    "known_propensity length must match the number of samples"
                )
            for i, p in enumerate(self.known_propensity):
                if not (math.isfinite(p) and 0.0 < p < 1.0):
                    raise ConfigurationError(
                        f"known_propensity[{i}] = {p} is outside (0, 1)"
                    )

    def __len__(self):
        return len(self.samples)

    @property
    def n_covariates(self) -> int:
        return len(self.samples[0].covariates)

    def covariate_matrix(self) -> np.ndarray:
        return np.array([s.covariates for s in self.samples], dtype=float)

    def treatments(self) -> np.ndarray:
        return np.array([s.treatment for s in self.samples], dtype=float)

    def outcomes(self) -> np.ndarray:
        return np.array([s.outcome for s in self.samples], dtype=float)

    def propensities(self) -> np.ndarray:
        if self.known_propensity is None:
            raise ConfigurationError("dataset has no known propensities")
        return np.array(self.known_propensity, dtype=float)


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping for CSV ingestion. The file format never fixes names."""

    covariates: tuple[str, ...]
    treatment: str = "a"
    outcome: str = "y"
    propensity: str | None = None


@dataclass(frozen=True)
class SplitAssignment:
    """Per-sample fold indices for a balanced K-fold split.

    Reproducible: the assignment is a pure function of (n, K, seed).
    """

    fold_index: tuple[int, ...]
    n_folds: int
    seed: int

    def __post_init__(self):
        counts = [0] * self.n_folds
        for f in self.fold_index:
            counts[f] += 1
        if min(counts) == 0:
            raise ConfigurationError("every fold must be nonempty")
        if max(counts) - min(counts) > 1:
            raise ConfigurationError("fold sizes may differ by at most 1")

    def indices_in_fold(self, k: int) -> np.ndarray:
        mask = np.array(self.fold_index) == k
        return np.flatnonzero(mask)

    def indices_out_of_fold(self, k: int) -> np.ndarray:
        mask = np.array(self.fold_index) != k
        return np.flatnonzero(mask)


def split(ds: Dataset | int, n_folds: int, seed: int) -> SplitAssignment:
    """Assign samples to K balanced folds via a seeded shuffle + round robin.

    Accepts either a Dataset or a plain sample count; the assignment depends
    only on the count, K, and the seed.
    """
    n = len(ds) if isinstance(ds, Dataset) else int(ds)
    if n_folds < 2:
        raise ConfigurationError(f"need at least 2 folds, got {n_folds}")
    if n_folds > n:
        raise ConfigurationError(f"cannot split {n} samples into {n_folds} folds")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    fold_index = np.empty(n, dtype=int)
    fold_index[order] = np.arange(n) % n_folds
    return SplitAssignment(tuple(int(f) for f in fold_index), n_folds, seed)


def _parse_cell(raw, row: int, column: str) -> float:
    if raw is None or raw == "":
        raise CsvParseError(
            f"row {row}, column '{column}': missing value",
            row=row, column=column,
        )
    try:
        value = float(raw)
    except ValueError:
        raise CsvParseError(
            f"row {row}, column '{column}': cannot parse {raw!r} as a number",
            row=row, column=column,
        ) from None
    if not math.isfinite(value):
        raise CsvParseError(
            f"row {row}, column '{column}': value {raw!r} is not finite",
            row=row, column=column,
        )
    return value


def load_csv(path, schema: CsvSchema,
             role: DatasetRole = DatasetRole.SMALL_UNCONFOUNDED) -> Dataset:
    """Load a dataset from a UTF-8 CSV file with a header row.

    Rows are kept in file order. Raises SchemaError when a mapped column is
    absent and CsvParseError (naming row and column) on any non-numeric cell,
    non-finite value, or treatment outside {0, 1}. Row numbers count from 1
    at the first data row.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        wanted = list(schema.covariates) + [schema.treatment, schema.outcome]
        if schema.propensity is not None:
            wanted.append(schema.propensity)
        missing = [c for c in wanted if c not in header]
        if missing:
            raise SchemaError(f"missing columns {missing} in {path}")

        samples = []
        propensities = [] if schema.propensity is not None else None
        for row_no, record in enumerate(reader, start=1):
            covs = tuple(
                _parse_cell(record[c], row_no, c) for c in schema.covariates
            )
            a_raw = _parse_cell(record[schema.treatment], row_no, schema.treatment)
            if a_raw not in (0.0, 1.0):
                raise CsvParseError(
                    f"row {row_no}, column '{schema.treatment}': treatment must be "
                    f"0 or 1, got {record[schema.treatment]!r}",
                    row=row_no, column=schema.treatment,
                )
            y = _parse_cell(record[schema.outcome], row_no, schema.outcome)
            samples.append(Sample(covs, int(a_raw), y))
            if propensities is not None:
                p = _parse_cell(record[schema.propensity], row_no, schema.propensity)
                if not (0.0 < p < 1.0):
                    raise CsvParseError(
                        f"row {row_no}, column '{schema.propensity}': propensity "
                        f"must lie in (0, 1), got {p}",
                        row=row_no, column=schema.propensity,
                    )
                propensities.append(p)

    if not samples:
        raise SchemaError(f"{path} contains a header but no data rows")
    return Dataset(
        samples=tuple(samples),
        role=role,
        known_propensity=tuple(propensities) if propensities is not None else None,
    )


def save_csv(ds: Dataset, path, schema: CsvSchema) -> None:
    """Write a dataset to CSV with full float precision (round-trips exactly)."""
    if len(schema.covariates) != ds.n_covariates:
        raise ConfigurationError(
            f"schema names {len(schema.covariates)} covariates, "
            f"dataset has {ds.n_covariates}"
        )
    if schema.propensity is not None and ds.known_propensity is None:
        raise ConfigurationError("schema requests a propensity column but the "
                                 "dataset has no known propensities")
    header = list(schema.covariates) + [schema.treatment, schema.outcome]
    if schema.propensity is not None:
        header.append(schema.propensity)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, s in enumerate(ds.samples):
            row = [repr(float(c)) for c in s.covariates]
            row.append(str(int(s.treatment)))
            row.append(repr(float(s.outcome)))
            if schema.propensity is not None:
                row.append(repr(float(ds.known_propensity[i])))
            writer.writerow(row)
