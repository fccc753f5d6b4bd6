"""End-to-end run: CENTRIST -> vocabularies -> per-image encodings -> fusion
-> tier-1 classifiers -> stacking -> report.

Every artifact lands under the run's output directory tagged with the
config hash and is reused on the next run when the hash matches, so stages
can be re-entered individually and deleted artifacts are rebuilt from the
persisted upstream ones. Vocabularies and classifiers only ever see
training-split images.
"""

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .. import centrist as centrist_mod
from .. import encoder as enc
from ..classify import BaseSpec, LabeledDataset, evaluate, load_classifier, train_classifier, train_stack
from ..codebook import Codebook, GmmModel, VisualWordSet, fit_gmm, fit_kmeans
from ..serialization import ModelFormatError, canonical_json
from .config import _parse_feature
from .features import ConfigHashMismatch, FeatureFileError, FeatureMatrix, load_entity_features
from .report import REPORT_SCHEMA, export_report

logger = logging.getLogger(__name__)

STAGES = ("centrist", "codebook", "encode", "fuse", "train", "stack", "eval")
KIND_ORDER = ("rf", "et", "gbt", "svm")


class PipelineError(RuntimeError):
    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def _feature_stem(name):
    return name.replace(":", "_")


class Run:
    def __init__(self, config, manifest, force=False):
        self.config = config
        self.manifest = manifest
        self.force = force
        self.hash = config.config_hash()
        self.out = Path(config.output_dir)
        self.features_dir = self.out / "features"
        self.models_dir = self.out / "models"
        self.rows = {r.image_id: r for r in manifest.rows}
        self.ids = [r.image_id for r in manifest.rows]
        self.train_ids = [r.image_id for r in manifest.rows if r.split == "train"]
        self.val_ids = [r.image_id for r in manifest.rows if r.split == "val"]
        if not self.train_ids:
            raise PipelineError("manifest", "no training-split images")
        self._cache = {}

    # ---- helpers -------------------------------------------------------

    @contextmanager
    def stage(self, name):
        try:
            yield
        except PipelineError:
            raise
        except (ValueError, OSError, KeyError) as exc:
            raise PipelineError(name, str(exc)) from exc

    def _map(self, fn, items):
        if self.config.workers > 1:
            with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
                return list(pool.map(fn, items))
        return [fn(i) for i in items]

    def _cached(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def _matrix(self, name, build):
        stem = self.features_dir / _feature_stem(name)
        if not self.force and stem.with_suffix(".json").exists():
            try:
                return FeatureMatrix.load(stem, self.hash)
            except ConfigHashMismatch:
                logger.info("%s was written under another config; rebuilding", stem)
            except FeatureFileError as exc:
                logger.warning("%s unreadable (%s); rebuilding", stem, exc)
        fm = build()
        fm.metadata["config_hash"] = self.hash
        fm.save(stem)
        return fm

    def _model(self, path, load, build):
        if not self.force and path.exists():
            try:
                model = load(path)
            except (ModelFormatError, KeyError) as exc:
                logger.warning("%s unreadable (%s); refitting", path, exc)
            else:
                meta = model.meta if hasattr(model, "meta") else model.config
                if meta.get("config_hash") == self.hash:
                    return model
        model = build()
        model.save(path)
        return model

    def _json_artifact(self, path, build):
        if not self.force and path.exists():
            data = json.loads(path.read_text(encoding="utf-8"))
            if data.get("config_hash") == self.hash:
                return data
        data = dict(build(), config_hash=self.hash)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(data, sort_keys=True, indent=1) + "\n", encoding="utf-8")
        return data

    # ---- inputs --------------------------------------------------------

    def entity_words(self, modality):
        def build():
            if modality not in self.manifest.modalities:
                raise PipelineError("codebook", f"manifest has no {modality}_features column")
            words, dim = {}, None
            for image_id in self.ids:
                path = self.rows[image_id].entity_feature_paths.get(modality)
                if path is None:
                    words[image_id] = None
                    continue
                vecs = load_entity_features(path, expected_dim=dim)
                dim = vecs.shape[1]
                words[image_id] = vecs
            if dim is None:
                raise PipelineError("codebook", f"no {modality} feature files at all")
            return {i: (np.zeros((0, dim)) if v is None else v) for i, v in words.items()}

        return self._cached(("words", modality), build)

    def caption(self, image_id):
        path = self.rows[image_id].caption_path
        return "" if path is None else path.read_text(encoding="utf-8")

    # ---- stages --------------------------------------------------------

    def scene_features(self):
        def build():
            def one(image_id):
                img = centrist_mod.read_pnm_gray(self.rows[image_id].image_path)
                return centrist_mod.centrist(img)

            rows = self._map(one, self.ids)
            return FeatureMatrix(self.ids, np.vstack(rows),
                                 {"producer": "centrist", "feature": "scene:centrist",
                                  "modality": "scene", "encoder": "centrist"})

        with self.stage("centrist"):
            return self._cached("scene", lambda: self._matrix("scene:centrist", build))

    def _entity_modalities(self):
        mods = [m for m in ("face", "pose") if m in self.manifest.modalities]
        needed = {_parse_feature(f)[0] for f in self.config.fusion_order()} & {"face", "pose"}
        missing = needed - set(mods)
        if missing:
            raise PipelineError("codebook", f"fusion needs {sorted(missing)} but the manifest has no such column")
        return mods

    def _train_words(self, modality):
        words = self.entity_words(modality)
        return VisualWordSet.from_images({i: words[i] for i in self.train_ids})

    def _fit_meta(self, model, modality):
        model.meta.update(source_split="train", modality=modality, config_hash=self.hash)
        return model

    def kmeans(self, modality):
        c = self.config
        path = self.models_dir / f"{modality}_kmeans.bin"
        with self.stage("codebook"):
            return self._cached(("kmeans", modality), lambda: self._model(
                path, Codebook.load, lambda: self._fit_meta(fit_kmeans(
                    self._train_words(modality), c.vocab_size, seed=c.derive_seed("kmeans", modality),
                    max_iter=c.kmeans_max_iter, tol=c.kmeans_tol), modality)))

    def gmm(self, modality):
        c = self.config
        path = self.models_dir / f"{modality}_gmm.bin"
        with self.stage("codebook"):
            return self._cached(("gmm", modality), lambda: self._model(
                path, GmmModel.load, lambda: self._fit_meta(fit_gmm(
                    self._train_words(modality), c.gmm_components, seed=c.derive_seed("gmm", modality),
                    max_iter=c.gmm_max_iter, tol=c.gmm_tol, kmeans_iter=c.kmeans_max_iter), modality)))

    def vocabulary(self):
        def build():
            captions = [self.caption(i) for i in self.train_ids]
            if self.config.caption_vocab_size is None:
                vocab = enc.build_vocabulary(captions, self.config.caption_min_count)
            else:
                vocab = enc.fixed_size_vocabulary(captions, self.config.caption_vocab_size,
                                                  self.config.caption_min_count)
            if vocab.size == 0:
                raise PipelineError("codebook", "training captions produced an empty vocabulary")
            return {"tokens": list(vocab.tokens), "provenance": sorted(self.train_ids), "source_split": "train"}

        with self.stage("codebook"):
            data = self._cached("vocab", lambda: self._json_artifact(self.models_dir / "text_vocab.json", build))
            return enc.Vocabulary(tuple(data["tokens"]))

    def codebooks(self):
        for m in self._entity_modalities():
            self.kmeans(m)
            self.gmm(m)
        if any(f.startswith("text:") for f in self.individual_features()):
            self.vocabulary()

    def individual_features(self):
        """Every feature set evaluated on its own: the fusion order plus pose if present."""
        names = list(self.config.fusion_order())
        if "pose" in self.manifest.modalities:
            names += [f"pose:{e}" for e in ("tf", "vlad", "wa", "gmm") if f"pose:{e}" not in names]
        return names

    def feature(self, name):
        modality, encoder = _parse_feature(name)
        if encoder == "centrist":
            return self.scene_features()

        def build_bow():
            vocab = self.vocabulary()
            rows = [enc.encode_bow(vocab, self.caption(i), i).values for i in self.ids]
            return FeatureMatrix(self.ids, np.vstack(rows), {
                "producer": "encoder", "feature": name, "modality": modality, "encoder": encoder,
                "vocab_size": vocab.size})

        def build_entity():
            model = self.gmm(modality) if encoder == "gmm" else self.kmeans(modality)
            fn = {"tf": enc.encode_tf, "vlad": enc.encode_vlad, "wa": enc.encode_wa, "gmm": enc.encode_gmm}[encoder]
            length = enc.encoded_length(encoder, k=model.k, dim=model.dim)
            words = self.entity_words(modality)
            empty = []

            def one(image_id):
                try:
                    return fn(model, words[image_id], image_id, modality).values
                except enc.EmptyImageError:
                    empty.append(image_id)
                    return np.zeros(length)

            rows = self._map(one, self.ids)
            if empty:
                logger.info("%s: %d image(s) without %s entities encoded as zeros", name, len(empty), modality)
            return FeatureMatrix(self.ids, np.vstack(rows), {
                "producer": "encoder", "feature": name, "modality": modality, "encoder": encoder,
                "empty_images": sorted(empty)})

        with self.stage("encode"):
            build = build_bow if encoder == "bow" else build_entity
            return self._cached(("feature", name), lambda: self._matrix(name, build))

    def fused(self):
        order = self.config.fusion_order()

        def build():
            mats = [self.feature(n) for n in order]
            layout = [(*_parse_feature(n), m.dim) for n, m in zip(order, mats)]
            rows = []
            for r, image_id in enumerate(self.ids):
                parts = [enc.EncodedImage(image_id, mod, e, m.rows[r]) for (mod, e, _), m in zip(layout, mats)]
                rows.append(enc.concatenate(parts, layout).values)
            offsets = np.cumsum([0] + [m.dim for m in mats[:-1]])
            return FeatureMatrix(self.ids, np.vstack(rows), {
                "producer": "fuse", "feature": "fused",
                "parts": [{"feature": n, "offset": int(o), "length": m.dim} for n, o, m in zip(order, offsets, mats)]})

        with self.stage("fuse"):
            return self._cached("fused", lambda: self._matrix("fused", build))

    def _dataset(self, fm, ids):
        return LabeledDataset(fm.select(ids), np.array([self.rows[i].label for i in ids]), tuple(ids))

    def _kinds(self):
        return [k for k in KIND_ORDER if k in self.config.classifiers]

    def _classifier_config(self, kind, *scope):
        return dict(self.config.classifiers[kind], seed=self.config.derive_seed(*scope, kind))

    def tier1(self):
        def build():
            names = (self.individual_features() if self.config.evaluate_individual else []) + ["fused"]
            results = []
            for name in names:
                fm = self.fused() if name == "fused" else self.feature(name)
                train = self._dataset(fm, self.train_ids)
                val = self._dataset(fm, self.val_ids) if self.val_ids else None
                for kind in self._kinds():
                    path = self.models_dir / "tier1" / f"{_feature_stem(name)}__{kind}.bin"
                    model = self._model(path, load_classifier, lambda: self._tagged(train_classifier(
                        kind, train, self._classifier_config(kind, "tier1", name))))
                    results.append({
                        "feature": name, "classifier": kind,
                        "train": evaluate(model, train)["accuracy"],
                        "validation": evaluate(model, val)["accuracy"] if val else None,
                    })
            return {"results": results}

        with self.stage("train"):
            return self._cached("tier1", lambda: self._json_artifact(self.out / "tier1_results.json", build))

    def _tagged(self, model):
        model.config = dict(model.config, config_hash=self.hash, source_split="train")
        return model

    def _base_specs(self, fused):
        kinds = self._kinds()
        if self.config.stack_mode == "concat":
            return [BaseSpec(k, self._classifier_config(k, "stack"), None, k) for k in kinds]
        specs = []
        for part in fused.metadata["parts"]:
            cols = {"start": part["offset"], "stop": part["offset"] + part["length"]}
            for k in kinds:
                specs.append(BaseSpec(k, self._classifier_config(k, "stack", part["feature"]), cols,
                                      f"{part['feature']}/{k}"))
        return specs

    def stack(self):
        def build():
            fused = self.fused()
            train = self._dataset(fused, self.train_ids)
            val = self._dataset(fused, self.val_ids) if self.val_ids else None
            model = self._model(self.models_dir / "stack.bin", load_classifier, lambda: self._tagged(train_stack(
                train, self._base_specs(fused), folds=self.config.folds,
                seed=self.config.derive_seed("stack-folds"), combiner_config=self.config.combiner)))
            val_eval = evaluate(model, val) if val else None
            return {
                "mode": self.config.stack_mode,
                "folds": self.config.folds,
                "bases": [s.name or s.kind for s in model.specs],
                "train": evaluate(model, train)["accuracy"],
                "validation": val_eval["accuracy"] if val_eval else None,
                "validation_confusion": val_eval["confusion"] if val_eval else None,
                "validation_per_class": val_eval["per_class_accuracy"] if val_eval else None,
            }

        with self.stage("stack"):
            return self._cached("stack", lambda: self._json_artifact(self.out / "stack_results.json", build))

    def report(self):
        tier1 = self.tier1()["results"]
        stacked = self.stack()
        fused = self.fused()
        dims = {n: self.feature(n).dim for n in self.individual_features()}
        dims["fused"] = fused.dim
        stacked = {k: v for k, v in stacked.items() if k != "config_hash"}
        return {
            "schema_version": REPORT_SCHEMA,
            "config_hash": self.hash,
            "n_train": len(self.train_ids),
            "n_val": len(self.val_ids),
            "classifiers": self._kinds(),
            "fusion": fused.metadata["parts"],
            "feature_dims": dims,
            "results": tier1,
            "stacked": stacked,
        }

    def execute(self, until="eval"):
        if until not in STAGES:
            raise ValueError(f"unknown stage {until!r}; choose from {', '.join(STAGES)}")
        self.out.mkdir(parents=True, exist_ok=True)
        steps = {
            "centrist": self.scene_features,
            "codebook": self.codebooks,
            "encode": lambda: [self.feature(n) for n in self.individual_features()],
            "fuse": self.fused,
            "train": self.tier1,
            "stack": self.stack,
        }
        for name in STAGES[:STAGES.index(until) + 1]:
            if name == "eval":
                with self.stage("eval"):
                    report = self.report()
                    export_report(report, "json", self.out / "report.json")
                    export_report(report, "table", self.out / "report.txt")
                return report
            logger.info("stage %s", name)
            steps[name]()
        return None


def run_pipeline(config, manifest, force=False):
    """Run every stage and return the evaluation report."""
    return Run(config, manifest, force=force).execute("eval")


def report_digest(report):
    return hashlib.sha256(canonical_json(report).encode("utf-8")).hexdigest()
