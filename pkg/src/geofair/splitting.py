"""Spatial train/test split and spatial CV folds, at whole-state granularity.

Keeping entire states on one side of every boundary prevents spatial label
leakage between nearby villages. The train/test split shuffles states
uniformly (keyed on the lexicographically sorted state list, so dataset row
order is irrelevant) and draws states into the training set until their
cumulative person population first reaches the threshold share; the rest form
the test set. CV folds balance person population greedily across k folds.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import SingleState, TooFewStates

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 2.0 / 3.0


@dataclass(frozen=True)
class SplitAssignment:
    train_states: tuple
    test_states: tuple
    seed: int
    threshold: float
    achieved_train_pop_frac: float
    achieved_train_village_frac: float
    degenerate: bool = False

    def validate(self) -> None:
        train, test = set(self.train_states), set(self.test_states)
        assert train and test and not (train & test)
        if not self.degenerate:
            assert self.achieved_train_pop_frac >= self.threshold


@dataclass(frozen=True)
class FoldAssignment:
    fold_of_state: dict = field(default_factory=dict)
    k: int = 3
    seed: int = 0


def _shuffled_states(ds: Dataset, seed: int) -> list:
    states = ds.states()  # sorted, so row order cannot matter
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    order = rng.permutation(len(states))
    return [states[i] for i in order]


def _first_crossing(ordered_states, pops: dict, threshold: float) -> tuple:
    """Draw states in order until cumulative population first reaches
    threshold * total; returns (train list, test list, degenerate flag)."""
    total = sum(pops[s] for s in ordered_states)
    goal = threshold * total
    train = []
    cum = 0
    for i, s in enumerate(ordered_states):
        train.append(s)
        cum += pops[s]
        if cum >= goal:
            test = list(ordered_states[i + 1:])
            break
    else:  # exhausted without crossing (threshold > 1 edge cases)
        test = []
    degenerate = False
    if not test:
        # drawing consumed every state; give the last drawn one to test
        test = [train.pop()]
        degenerate = True
    return train, test, degenerate


def spatial_split(ds: Dataset, threshold: float = DEFAULT_THRESHOLD,
                  seed: int = 0) -> SplitAssignment:
    """Assign whole states to train/test by the first-crossing draw."""
    states = ds.states()
    if len(states) < 2:
        raise SingleState("spatial split needs at least 2 distinct states")
    pops = ds.state_populations()
    ordered = _shuffled_states(ds, seed)
    train, test, degenerate = _first_crossing(ordered, pops, threshold)
    if degenerate:
        logger.warning("spatial_split: draw consumed all states; moved %r to "
                       "the test set (achieved fraction drops below the "
                       "threshold)", test[0])

    total_pop = sum(pops.values())
    train_set = set(train)
    train_pop = sum(pops[s] for s in train)
    n_train_villages = sum(1 for r in ds if r.state_id in train_set)
    return SplitAssignment(
        train_states=tuple(sorted(train)),
        test_states=tuple(sorted(test)),
        seed=seed,
        threshold=threshold,
        achieved_train_pop_frac=train_pop / total_pop,
        achieved_train_village_frac=n_train_villages / len(ds),
        degenerate=degenerate,
    )


def _greedy_folds(ordered_states, pops: dict, k: int) -> dict:
    """Assign states one at a time to the currently least-populous fold."""
    loads = np.zeros(k, dtype=np.float64)
    fold_of_state = {}
    for s in ordered_states:
        f = int(np.argmin(loads))  # ties -> lowest fold index
        fold_of_state[s] = f
        loads[f] += pops[s]
    return fold_of_state


def spatial_folds(ds: Dataset, split: SplitAssignment, k: int = 3,
                  seed: int = 0) -> FoldAssignment:
    """Partition training states into k population-balanced folds."""
    train_states = sorted(split.train_states)
    if len(train_states) < k:
        raise TooFewStates(f"{len(train_states)} training states < {k} folds")
    pops = ds.state_populations()
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    order = rng.permutation(len(train_states))
    ordered = [train_states[i] for i in order]
    return FoldAssignment(fold_of_state=_greedy_folds(ordered, pops, k),
                          k=k, seed=seed)


# ---------------------------------------------------------------------------
# JSON artifact
# ---------------------------------------------------------------------------

def split_to_json(split: SplitAssignment, folds: FoldAssignment = None) -> str:
    doc = {
        "train_states": list(split.train_states),
        "test_states": list(split.test_states),
        "seed": split.seed,
        "threshold": split.threshold,
        "achieved_train_pop_frac": split.achieved_train_pop_frac,
        "achieved_train_village_frac": split.achieved_train_village_frac,
        "degenerate": split.degenerate,
    }
    if folds is not None:
        doc["fold_of_state"] = dict(sorted(folds.fold_of_state.items()))
        doc["k"] = folds.k
        doc["fold_seed"] = folds.seed
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def split_from_json(text: str) -> tuple:
    """Returns (SplitAssignment, FoldAssignment or None)."""
    doc = json.loads(text)
    split = SplitAssignment(
        train_states=tuple(doc["train_states"]),
        test_states=tuple(doc["test_states"]),
        seed=doc["seed"],
        threshold=doc["threshold"],
        achieved_train_pop_frac=doc["achieved_train_pop_frac"],
        achieved_train_village_frac=doc["achieved_train_village_frac"],
        degenerate=doc.get("degenerate", False),
    )
    folds = None
    if "fold_of_state" in doc:
        folds = FoldAssignment(fold_of_state=dict(doc["fold_of_state"]),
                               k=doc["k"], seed=doc["fold_seed"])
    return split, folds


def load_split(path) -> tuple:
    with open(path, encoding="utf-8") as fh:
        return split_from_json(fh.read())


def save_split(split: SplitAssignment, path, folds: FoldAssignment = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(split_to_json(split, folds))
