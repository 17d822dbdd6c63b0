"""Loss-mode ablation over shared seeds."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..errors import ContractViolation
from .config import TrainConfig
from .trainer import Split, TrainResult, load_data, train


@dataclass
class AblationResult:
    modes: list[str]
    seeds: list[int]
    clean: dict[str, list[float]] = field(default_factory=dict)  # mode -> mIoU (%) per seed
    occluded: dict[str, list[float]] = field(default_factory=dict)

    def mean(self, mode: str, split: str = "occluded") -> float:
        return float(np.mean(getattr(self, split)[mode]))

    def std(self, mode: str, split: str = "occluded") -> float:
        return float(np.std(getattr(self, split)[mode]))


def ablation(base: TrainConfig, modes: Sequence[str], seeds: Sequence[int],
             data: tuple[Split, Split] | None = None, log: Callable[[str], None] | None = None,
             on_result: Callable[[TrainResult], None] | None = None) -> AblationResult:
    """Train every (mode, seed) pair on the same data; scores are taken at the best clean-val epoch."""
    if len(modes) < 2:
        raise ContractViolation(f"an ablation needs at least 2 loss modes, got {list(modes)}")
    if not seeds:
        raise ContractViolation("an ablation needs at least one seed")
    data = data if data is not None else load_data(base)
    res = AblationResult(list(modes), [int(s) for s in seeds])
    for mode in modes:
        res.clean[mode], res.occluded[mode] = [], []
        for seed in seeds:
            r = train(base.replace(loss_mode=mode, seed=int(seed)), data, log=log)
            res.clean[mode].append(100.0 * r.best.clean.miou)
            res.occluded[mode].append(100.0 * r.best.occluded.miou)
            if on_result:
                on_result(r)
    return res


def ablation_csv(res: AblationResult) -> str:
    """One row per mode: per-seed clean and occluded mIoU (%) plus mean and std."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["mode"]
    for split in ("clean", "occluded"):
        header += [f"{split}_seed{s}" for s in res.seeds] + [f"{split}_mean", f"{split}_std"]
    w.writerow(header)
    for mode in res.modes:
        row = [mode]
        for split in ("clean", "occluded"):
            vals = getattr(res, split)[mode]
            row += [f"{v:.4f}" for v in vals] + [f"{res.mean(mode, split):.4f}", f"{res.std(mode, split):.4f}"]
        w.writerow(row)
    return buf.getvalue()


def ablation_table(res: AblationResult) -> str:
    width = max(len(m) for m in res.modes)
    lines = [f"{'mode':<{width}}  {'clean mIoU (%)':>16}  {'occluded mIoU (%)':>18}"]
    for mode in res.modes:
        clean = f"{res.mean(mode, 'clean'):.2f} ± {res.std(mode, 'clean'):.2f}"
        occ = f"{res.mean(mode):.2f} ± {res.std(mode):.2f}"
        lines.append(f"{mode:<{width}}  {clean:>16}  {occ:>18}")
    return "\n".join(lines)
