"""
Experiment Pipeline - configuration-driven train / attack / regions / audit / report

Every stage reads what earlier stages wrote under out_dir, writes its own
artifacts and tables, and records them in run_manifest.json. Outputs are a
pure function of (config, data files); wall-clock timings go to timings.json.
"""

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Sequence, Tuple

from ..attacks import generate_set, run_attack
from ..exceptions import BoundaryProbeError, MissingArtifactError
from ..formats.image_block import load_adversarial_set, load_samples, save_adversarial_set, save_samples
from ..formats.tables import Table
from ..models import AdversarialSet, AttackConfig, BaseMode, Ensemble, ExperimentConfig, ImageVec, RegionType
from ..utils.helpers import canonical_json, rounded
from ..utils.logger import logger
from .data import load_mnist, resolve_selector
from .ensemble import (
    alert_summary, disagreement_rate, load_ensemble, misclassification_rates, predict_matrix,
    save_ensemble, train_ensemble
)
from .network import error_rate, predict
from .regions import (
    ball_volume, compute_intervals, evaluate, rectangle_for_set, sample_ball,
    sample_within_delta, save_rectangle, save_report, sweep_dimensions
)

STAGES = ("train", "attack", "regions", "audit", "report")
REPORT_TABLES = ("baseline", "transfer", "regions", "region_l2", "sweep", "audit", "ball_control")


@dataclass
class StageResult:
    """What one stage produced; failures are per-item errors that were skipped"""
    stage: str
    artifacts: List[str] = field(default_factory=list)
    shortfalls: List[str] = field(default_factory=list)
    failures: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "artifacts": sorted(set(self.artifacts)),
            "shortfalls": list(self.shortfalls),
            "failures": list(self.failures),
        }


@dataclass
class AttackTaskResult:
    sets: List[Tuple[AdversarialSet, List[float]]] = field(default_factory=list)
    shortfalls: List[str] = field(default_factory=list)
    failures: List[str] = field(default_factory=list)


class ExperimentPipeline:
    """
    Stages:
    1. train(): ensemble + baseline table
    2. attack(): adversarial sets per (image, attack, t) + transfer table
    3. regions(): rectangles, samples, region and L2 tables (+ dimension sweep)
    4. audit(): clean vs region disagreement, alert strategy, random-ball control
    5. report(): report.md from the stage tables
    """

    def __init__(self, config: ExperimentConfig):
        config.validate()
        self.config = config
        self.out = Path(config.out_dir)
        self._data_cache: Dict[str, Any] = {}

    # ------------------------------------------------------------ paths

    @property
    def tables_dir(self) -> Path:
        return self.out / "tables"

    @property
    def manifest_path(self) -> Path:
        return self.out / "run_manifest.json"

    @property
    def ensemble_path(self) -> Path:
        return self.out / "ensemble.json"

    def relative(self, path: Path) -> str:
        return Path(path).relative_to(self.out).as_posix()

    # ------------------------------------------------------------ bookkeeping

    def _write_json(self, name: str, data: Any) -> Path:
        path = self.out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(canonical_json(data), encoding="utf-8")
        return path

    def _read_json(self, name: str, missing_hint: str) -> Any:
        path = self.out / name
        if not path.exists():
            raise MissingArtifactError(f"{path} not found ({missing_hint})")
        return json.loads(path.read_text(encoding="utf-8"))

    def write_resolved_config(self) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        resolved = dict(self.config.to_dict(), config_hash=self.config.config_hash)
        self._write_json("resolved_config.json", resolved)

    def _record(self, result: StageResult, seconds: float) -> None:
        manifest = {"config_hash": self.config.config_hash, "stages": {}, "timings_file": "timings.json"}
        if self.manifest_path.exists():
            previous = json.loads(self.manifest_path.read_text(encoding="utf-8"))
            if previous.get("config_hash") == self.config.config_hash:
                manifest["stages"] = previous.get("stages", {})
            else:
                logger.warning("configuration changed since the last run; earlier stage records dropped")
        manifest["stages"][result.stage] = result.to_dict()
        missing = [p for p in result.artifacts if not (self.out / p).exists()]
        if missing:
            logger.error(f"{result.stage}: artifacts missing at stage end: {missing}")
        self._write_json("run_manifest.json", manifest)

        timings_path = self.out / "timings.json"
        timings = json.loads(timings_path.read_text(encoding="utf-8")) if timings_path.exists() else {}
        timings[result.stage] = round(seconds, 3)
        self._write_json("timings.json", timings)

    def _run_stage(self, stage: str, body: Callable[[StageResult], None]) -> StageResult:
        self.write_resolved_config()
        logger.info(f"stage {stage} started ({self.config.name}, hash {self.config.config_hash[:12]})")
        started = time.time()
        result = StageResult(stage, artifacts=["resolved_config.json"])
        body(result)
        self._record(result, time.time() - started)
        logger.success(f"stage {stage} finished: {len(result.artifacts)} artifacts, "
                       f"{len(result.shortfalls)} shortfalls, {len(result.failures)} failures")
        return result

    def _write_table(self, table: Table, result: StageResult) -> None:
        for path in table.write(self.tables_dir):
            result.artifacts.append(self.relative(path))

    def _map(self, func: Callable, items: Sequence) -> List:
        """Submission-ordered map, threaded when jobs > 1"""
        if self.config.jobs > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=self.config.jobs) as executor:
                return list(executor.map(func, items))
        return [func(item) for item in items]

    # ------------------------------------------------------------ data

    def dataset(self, split: str):
        if split not in self._data_cache:
            self._data_cache[split] = load_mnist(self.config.data, split)
        return self._data_cache[split]

    def clean_images(self) -> List[ImageVec]:
        return [resolve_selector(self.dataset(s.split), s) for s in self.config.images]

    def ensemble(self) -> Ensemble:
        return load_ensemble(self.ensemble_path)

    def model_columns(self) -> List[str]:
        return [f"M{i + 1}" for i in range(len(self.config.seeds))]

    # ------------------------------------------------------------ train

    def train(self) -> StageResult:
        return self._run_stage("train", self._train)

    def _train(self, result: StageResult) -> None:
        train_data = self.dataset("train")
        test_data = self.dataset("test")
        ens = train_ensemble(self.config.arch, train_data, self.config.seeds, self.config.train,
                             test_data=test_data, jobs=self.config.jobs)
        manifest = save_ensemble(ens, self.out)
        result.artifacts.append(self.relative(manifest))
        for model in ens.models:
            path = self.out / "models" / f"{model.model_id}.bin"
            result.artifacts.extend([self.relative(path), self.relative(path.with_suffix(".json"))])

        table = Table("baseline", "Mis-classification rates on clean test images", [""] + self.model_columns())
        table.add_row(["test error"] + [m.test_error for m in ens.models])
        table.add_row(["train error"] + [m.train_error for m in ens.models])
        self._write_table(table, result)

    # ------------------------------------------------------------ attack

    def attack(self) -> StageResult:
        return self._run_stage("attack", self._attack)

    def _attack_task(self, task: Tuple[ImageVec, AttackConfig, Ensemble]) -> AttackTaskResult:
        clean, attack_config, ens = task
        outcome = AttackTaskResult()
        true_class = clean.label
        name = f"{clean.file_stem} {attack_config.kind.display_name}"
        targets = attack_config.targets or [t for t in range(10) if t != true_class]
        wanted = self.config.min_count_for(attack_config)
        try:
            untargeted = run_attack(ens.target, clean, attack_config.with_target(None))
        except BoundaryProbeError as e:
            logger.error(f"{name}: {e}")
            outcome.failures.append(f"{name}: {e}")
            return outcome

        for target in targets:
            if target == true_class:
                continue
            try:
                adv_set = generate_set(ens.target, clean, attack_config.kind, target,
                                       delta=self.config.delta, min_count=wanted,
                                       config=attack_config, untargeted=untargeted)
            except BoundaryProbeError as e:
                logger.error(f"{name} →{target}: {e}")
                outcome.failures.append(f"{name} →{target}: {e}")
                continue
            if adv_set.shortfall:
                outcome.shortfalls.append(f"{clean.file_stem} {adv_set.kind.display_name} "
                                          f"{adv_set.transition}: {len(adv_set)} < {wanted}")
            if len(adv_set) == 0:
                continue
            rates = misclassification_rates(ens, adv_set.examples, true_class)
            outcome.sets.append((adv_set, rates))
        return outcome

    def _attack(self, result: StageResult) -> None:
        ens = self.ensemble()
        theta_high = self.config.regions.theta_high
        tasks = []
        for clean in self.clean_images():
            label = predict(ens.target, clean)
            if label != clean.label:
                message = f"{clean.file_stem}: {ens.target.model_id} labels it {label}, not {clean.label}"
                logger.error(message)
                result.failures.append(message)
                continue
            tasks.extend((clean, attack_config, ens) for attack_config in self.config.attacks)

        table = Table("transfer", "Attack misclassification rates",
                      ["attack"] + self.model_columns() + ["n", "transferable"])
        index = []
        for outcome in self._map(self._attack_task, tasks):
            result.shortfalls.extend(outcome.shortfalls)
            result.failures.extend(outcome.failures)
            for adv_set, rates in outcome.sets:
                path = save_adversarial_set(adv_set, self.out / "sets" / adv_set.clean.file_stem
                                            / f"{adv_set.file_stem}.bin")
                result.artifacts.append(self.relative(path))
                transferable = all(r >= theta_high for r in rates)
                table.add_row([adv_set.row_label] + rates + [len(adv_set), transferable])
                index.append({
                    "image": adv_set.clean.file_stem,
                    "kind": adv_set.kind.value,
                    "true_class": adv_set.true_class,
                    "target_class": adv_set.target_class,
                    "path": self.relative(path),
                    "count": len(adv_set),
                    "perturbed_pixels": adv_set.perturbed_pixel_count,
                    "delta": round(float(adv_set.delta), 6),
                    "shortfall": adv_set.shortfall,
                    "rates": rounded(rates),
                    "transferable": transferable,
                })
        self._write_json("sets/index.json", index)
        result.artifacts.append("sets/index.json")
        self._write_table(table, result)

    # ------------------------------------------------------------ regions

    def regions(self) -> StageResult:
        return self._run_stage("regions", self._regions)

    def _region_task(self, task: Tuple[Dict[str, Any], Ensemble]):
        entry, ens = task
        cfg = self.config.regions
        adv_set = load_adversarial_set(self.out / entry["path"])
        if len(adv_set) < cfg.min_set_size:
            return entry, None, f"{entry['path']}: {len(adv_set)} examples, too few for intervals"
        rect = rectangle_for_set(adv_set, cfg.tau, BaseMode(cfg.base_mode))
        delta = adv_set.delta if cfg.enforce_delta else None
        samples, rejected = sample_within_delta(rect, cfg.n_samples, cfg.sample_seed, delta)
        report = evaluate(rect, ens, cfg.n_samples, cfg.sample_seed, adv_set.true_class, adv_set,
                          cfg.thresholds, delta=delta, samples=samples)
        report.rejected = rejected
        sweep = []
        if cfg.sweep_b:
            sweep = sweep_dimensions(compute_intervals(adv_set), adv_set.clean.pixels, ens, cfg.sweep_b,
                                     cfg.n_samples, cfg.sample_seed, adv_set.true_class, BaseMode(cfg.base_mode))
        return entry, (adv_set, rect, samples, report, sweep), None

    def _regions(self, result: StageResult) -> None:
        index = self._read_json("sets/index.json", "run attack first")
        ens = self.ensemble()
        columns = self.model_columns()
        rate_table = Table("regions", "Misclassification rates in hyper-rectangles",
                           ["region", "s_(b)"] + columns + ["type"])
        l2_table = Table("region_l2", "L2 distance",
                         ["region", "L2 min", "L2 max", "L2 mean",
                          "L2 min attack", "L2 max attack", "L2 mean attack"])
        sweep_table = Table("sweep", "Misclassification rates by rectangle dimension",
                            ["region", "b", "s_(b)"] + columns + ["L2 mean"])
        region_index = []
        for entry, built, problem in self._map(self._region_task, [(e, ens) for e in index]):
            if problem:
                logger.warning(problem)
                result.shortfalls.append(problem)
                continue
            adv_set, rect, samples, report, sweep = built
            if report.region_type is RegionType.EMPTY:
                result.shortfalls.append(f"{report.label}: no sample inside delta {report.delta}")
            folder = self.out / "regions" / adv_set.clean.file_stem
            rect_path = save_rectangle(rect, folder / f"{adv_set.file_stem}.rect.json")
            report_path = save_report(report, folder / f"{adv_set.file_stem}.report.json")
            samples_path = save_samples(samples, folder / f"{adv_set.file_stem}.samples.bin",
                                        {"label": report.label, "seed": report.seed})
            result.artifacts.extend(self.relative(p) for p in (rect_path, report_path, samples_path))

            rate_table.add_row([report.label, report.smallest_size] + report.rates + [report.region_type.value])
            l2_table.add_row([report.l2_label, report.sample_l2.minimum, report.sample_l2.maximum,
                              report.sample_l2.mean, report.attack_l2.minimum, report.attack_l2.maximum,
                              report.attack_l2.mean])
            for point in sweep:
                sweep_table.add_row([report.l2_label, point.b, point.smallest_size] + point.rates
                                    + [point.sample_l2_mean])
            region_index.append({
                "image": adv_set.clean.file_stem,
                "label": report.label,
                "true_class": adv_set.true_class,
                "region_type": report.region_type.value,
                "rectangle": self.relative(rect_path),
                "report": self.relative(report_path),
                "samples": self.relative(samples_path),
            })

        self._write_json("regions/index.json", region_index)
        result.artifacts.append("regions/index.json")
        self._write_table(rate_table, result)
        self._write_table(l2_table, result)
        if self.config.regions.sweep_b:
            self._write_table(sweep_table, result)

    # ------------------------------------------------------------ audit

    def audit(self) -> StageResult:
        return self._run_stage("audit", self._audit)

    def _audit(self, result: StageResult) -> None:
        region_index = self._read_json("regions/index.json", "run regions first")
        ens = self.ensemble()
        audit_cfg = self.config.audit
        columns = self.model_columns()

        test_data = self.dataset("test")
        if audit_cfg.clean_limit is not None:
            test_data = test_data.head(audit_cfg.clean_limit)
        clean_rate = disagreement_rate(ens, test_data)
        errors = [error_rate(model, test_data) for model in ens.models]
        union_bound = float(sum(errors))
        logger.info(f"clean disagreement {clean_rate:.4f} (union bound {union_bound:.4f})")

        audit_table = Table("audit", "Disagreement and alert strategy",
                            ["region", "type", "disagreement", "coverage", "unalerted accuracy",
                             "alert sufficient"])
        audit_table.add_row(["clean test set", "", clean_rate, None, None, None])
        regions = []
        empty = []
        for entry in region_index:
            _, samples = load_samples(self.out / entry["samples"])
            if len(samples) == 0:
                logger.warning(f"{entry['label']}: no samples, left out of the alert verdict")
                empty.append(entry["label"])
                result.shortfalls.append(f"{entry['label']}: empty region, no alert verdict")
                continue
            labels = predict_matrix(ens, samples)
            summary = alert_summary(ens, samples, entry["true_class"], labels=labels)
            rate = summary.alert_rate
            sufficient = summary.sufficient
            audit_table.add_row([entry["label"], entry["region_type"], rate, summary.coverage,
                                 summary.unalerted_accuracy, sufficient])
            regions.append({
                "label": entry["label"],
                "region_type": entry["region_type"],
                "n_samples": summary.n,
                "disagreement": round(rate, 6),
                "coverage": round(summary.coverage, 6),
                "unalerted_accuracy": None if summary.unalerted_accuracy is None
                else round(summary.unalerted_accuracy, 6),
                "unanimous_wrong": summary.unanimous_wrong,
                "alert_sufficient": sufficient,
            })

        control_table = Table("ball_control", "Random samples from the delta ball",
                              ["image", "delta"] + columns)
        controls = []
        for clean in self.clean_images():
            samples = sample_ball(clean.pixels, audit_cfg.control_delta, audit_cfg.control_samples,
                                  audit_cfg.control_seed)
            rates = misclassification_rates(ens, samples, clean.label)
            control_table.add_row([clean.file_stem, audit_cfg.control_delta] + rates)
            controls.append({"image": clean.file_stem, "delta": audit_cfg.control_delta, "rates": rounded(rates)})

        volume = ball_volume(self.config.arch.input_size, audit_cfg.control_delta)
        audit = {
            "clean_disagreement": round(clean_rate, 6),
            "clean_errors": rounded(errors, 6),
            "union_bound": round(union_bound, 6),
            "union_bound_holds": clean_rate <= union_bound + 1e-12,
            "regions": regions,
            "empty_regions": empty,
            "alert_sufficient": all(r["alert_sufficient"] for r in regions) if regions else None,
            "ball_control": controls,
            "ball_log_volume": round(volume.log_volume, 6),
        }
        self._write_json("audit.json", audit)
        result.artifacts.append("audit.json")
        self._write_table(audit_table, result)
        self._write_table(control_table, result)

    # ------------------------------------------------------------ report

    def report(self) -> StageResult:
        return self._run_stage("report", self._report)

    def _report(self, result: StageResult) -> None:
        lines = [f"# {self.config.name}", "",
                 f"- architecture: {self.config.architecture}",
                 f"- seeds: {', '.join(str(s) for s in self.config.seeds)}",
                 f"- config hash: `{self.config.config_hash}`", ""]
        found = 0
        for name in REPORT_TABLES:
            path = self.tables_dir / f"{name}.md"
            if path.exists():
                lines.append(path.read_text(encoding="utf-8"))
                found += 1
        if found == 0:
            logger.warning("no stage tables found; report is empty")
        report_path = self.out / "report.md"
        report_path.write_text("\n".join(lines), encoding="utf-8")
        result.artifacts.append(self.relative(report_path))

    # ------------------------------------------------------------ all

    def run_all(self) -> List[StageResult]:
        return [self.train(), self.attack(), self.regions(), self.audit(), self.report()]


def cmd_train(config: ExperimentConfig) -> StageResult:
    return ExperimentPipeline(config).train()


def cmd_attack(config: ExperimentConfig) -> StageResult:
    return ExperimentPipeline(config).attack()


def cmd_regions(config: ExperimentConfig) -> StageResult:
    return ExperimentPipeline(config).regions()


def cmd_audit(config: ExperimentConfig) -> StageResult:
    return ExperimentPipeline(config).audit()


def cmd_report(config: ExperimentConfig) -> StageResult:
    return ExperimentPipeline(config).report()


def cmd_all(config: ExperimentConfig) -> List[StageResult]:
    return ExperimentPipeline(config).run_all()
