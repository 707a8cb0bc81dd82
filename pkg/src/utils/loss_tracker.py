# src/utils/loss_tracker.py
import json
import os
from datetime import datetime
from typing import Dict, List, Optional

import pandas as pd
from prettytable import PrettyTable


class LossTracker:
    """Track per-batch losses and close them into per-epoch means"""

    COMPONENTS = ("total", "recon", "kl")

    def __init__(self, log_dir: Optional[str] = None):
        self.log_dir = log_dir
        self.tracking_file = os.path.join(log_dir, "loss_tracking.json") if log_dir else None
        self.session = {
            "epochs": [],
            "total_batches": 0,
            "total_records": 0,
            "start_time": datetime.now().isoformat(),
        }
        self._reset_open_epoch()

    def _reset_open_epoch(self):
        self._sums = {key: 0.0 for key in self.COMPONENTS}
        self._records = 0
        self._batches = 0

    def add_batch(self, records: int, values: Dict[str, float]) -> float:
        """Record one batch's mean losses, weighted by its record count"""
        for key in self.COMPONENTS:
            self._sums[key] += values[key] * records
        self._records += records
        self._batches += 1
        self.session["total_batches"] += 1
        self.session["total_records"] += records
        return values["total"]

    def end_epoch(self, epoch: int) -> Dict[str, float]:
        if self._records == 0:
            raise ValueError(f"epoch {epoch} closed without any batches")
        record = {"epoch": epoch}
        record.update({key: self._sums[key] / self._records for key in self.COMPONENTS})
        record["batches"] = self._batches
        self.session["epochs"].append(record)
        self._reset_open_epoch()
        self.save()
        return record

    @property
    def history(self) -> List[Dict[str, float]]:
        return [{key: rec[key] for key in ("epoch",) + self.COMPONENTS}
                for rec in self.session["epochs"]]

    def save(self):
        """Save current tracking state to file"""
        if not self.tracking_file:
            return
        self.session["last_updated"] = datetime.now().isoformat()
        with open(self.tracking_file, "w") as f:
            json.dump(self.session, f, indent=2)

    def get_summary(self) -> Dict:
        epochs = self.session["epochs"]
        return {
            "epochs": len(epochs),
            "batches": self.session["total_batches"],
            "final_total": f"{epochs[-1]['total']:.4f}" if epochs else "n/a",
            "best_total": f"{min(e['total'] for e in epochs):.4f}" if epochs else "n/a",
        }


def history_frame(history: List[Dict[str, float]]) -> pd.DataFrame:
    return pd.DataFrame(history, columns=["epoch", "total", "recon", "kl"])


def write_loss_csv(history: List[Dict[str, float]], path: str):
    history_frame(history).to_csv(path, index=False)


def render_history(history: List[Dict[str, float]]) -> PrettyTable:
    table = PrettyTable(["epoch", "total", "recon", "kl"])
    for rec in history:
        table.add_row([rec["epoch"], f"{rec['total']:.4f}", f"{rec['recon']:.4f}",
                       f"{rec['kl']:.4f}"])
    return table
