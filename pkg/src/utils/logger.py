# src/utils/logger.py
import json
import os
from datetime import datetime
from typing import Any, Dict, Optional

import jsonlines
import wandb
from termcolor import colored


class RunLogger:
    """Per-run JSON logs, optionally mirrored to Weights & Biases"""

    def __init__(self, log_dir: str, use_wandb: bool = False,
                 run_config: Optional[Dict[str, Any]] = None, verbose: bool = True):
        self.log_dir = log_dir
        self.use_wandb = use_wandb
        self.verbose = verbose
        os.makedirs(log_dir, exist_ok=True)
        self.epoch_file = os.path.join(log_dir, "epochs.jsonl")
        self.event_file = os.path.join(log_dir, "events.jsonl")

        if use_wandb:
            wandb.init(
                project=os.getenv("WANDB_PROJECT", "targeted-vae"),
                config={**(run_config or {}), "timestamp": datetime.now().isoformat()},
            )

    def info(self, message: str):
        if self.verbose:
            print(colored(message, "cyan"))

    def warn(self, message: str):
        """Printed in yellow and kept in events.jsonl"""
        if self.verbose:
            print(colored(message, "yellow"))
        with jsonlines.open(self.event_file, mode="a") as writer:
            writer.write({"event": "warning", "message": message})

    def log_epoch(self, record: Dict[str, Any]):
        with jsonlines.open(self.epoch_file, mode="a") as writer:
            writer.write(record)
        self.info(f"epoch {record['epoch']}: total {record['total']:.4f} "
                  f"recon {record['recon']:.4f} kl {record['kl']:.4f}")
        if self.use_wandb:
            wandb.log({key: value for key, value in record.items() if key != "epoch"},
                      step=record["epoch"])

    def log_event(self, name: str, **fields: Any):
        """Append a named event (census result, artifact written, ...) to events.jsonl"""
        with jsonlines.open(self.event_file, mode="a") as writer:
            writer.write({"event": name, **fields})
        if self.use_wandb:
            wandb.log({f"{name}/{key}": value for key, value in fields.items()
                       if isinstance(value, (int, float))})

    def log_summary(self, results: Dict[str, Any]):
        summary_file = os.path.join(self.log_dir, "run_summary.json")
        with open(summary_file, "w") as f:
            json.dump(results, f, indent=2)
        if self.use_wandb:
            wandb.summary.update(results)

    def close(self):
        if self.use_wandb:
            wandb.finish()
