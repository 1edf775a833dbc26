"""Command-line front end.

    hardyworlds {worlds,quantum,lemmas,proof,histories,all} [--config PATH]
                [--script builtin|PATH] [--seed N] [--tolerance X] [--machine]

Exit status: 0 all checks pass (FLAG allowed), 1 a check failed, 2 bad
configuration, 3 a capacity bound was exceeded.

Configuration is an INI file::

    [setup]
    regions = L, R
    measurements = 2, 2
    outcomes = +, -
    # regions inside the forward cone of L
    # cone.L = R

    [model]
    # preset-optimal | solve | from-config | explicit | uniform
    mode = preset-optimal
    ; amplitudes = 0.5, 0.5, 0.5, 0.5
    ; amplitudes_imag = 0, 0, 0, 0
    ; angle.L1 = 0.9045568943023814

    [tolerances]
    null_tolerance = 1e-9
    numeric_tolerance = 1e-12

    [limits]
    max_worlds = 1048576
    max_candidates = 1000000

    [script]
    1 = (L2 & R2 & L2+) => (R1 []-> (L2 & R1 & L2+)) ; LOC1c

``explicit`` takes amplitudes and angles like ``from-config`` but skips the
Hardy validation, so non-Hardy models can be pushed through every check.
``uniform`` is a table-only model with every joint outcome equally likely.
"""

from __future__ import annotations

import argparse
import configparser
import itertools
import random
import re
import sys
from dataclasses import dataclass, field

import numpy as np

from . import histories, proofcheck, quantum, semantics
from .experiment import (
    DEFAULT_MAX_WORLDS,
    HARDY_SETUP,
    CapacityError,
    CausalStructure,
    Setup,
    SetupError,
    enumerate_logical_worlds,
)
from .formula import FormulaSyntaxError, UnknownAtom, choice
from .report import FAIL, FLAG, PASS, Verdict

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_CAPACITY = 0, 1, 2, 3
COMMANDS = ("worlds", "quantum", "lemmas", "proof", "histories")
MODES = ("preset-optimal", "solve", "from-config", "explicit", "uniform")

_DECIMAL = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


class ConfigError(ValueError):
    pass


# -- configuration ----------------------------------------------------------------

@dataclass
class Config:
    setup: Setup = HARDY_SETUP
    causal: CausalStructure = field(default_factory=lambda: CausalStructure.all_spacelike(("L", "R")))
    mode: str = "preset-optimal"
    amplitudes: list[complex] | None = None
    angles: dict[tuple[str, int], float] = field(default_factory=dict)
    null_tolerance: float = quantum.NULL_TOLERANCE
    numeric_tolerance: float = quantum.NUMERIC_TOLERANCE
    max_worlds: int = DEFAULT_MAX_WORLDS
    max_candidates: int = proofcheck.DEFAULT_MAX_CANDIDATES
    script: list[tuple[str, str]] | None = None


_KEYS = {
    "setup": {"regions", "measurements", "outcomes"},
    "model": {"mode", "amplitudes", "amplitudes_imag"},
    "tolerances": {"null_tolerance", "numeric_tolerance"},
    "limits": {"max_worlds", "max_candidates"},
}


def _decimal(text: str, where: str) -> float:
    text = text.strip()
    if not _DECIMAL.match(text):
        raise ConfigError(f"{where}: {text!r} is not a decimal number")
    return float(text)


def _integer(text: str, where: str) -> int:
    text = text.strip()
    if not text.isdigit():
        raise ConfigError(f"{where}: {text!r} is not a nonnegative integer")
    return int(text)


def _list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def parse_script_lines(lines, where: str) -> list[tuple[str, str]]:
    """``formula ; justification`` per line; blank lines and ``#`` comments skipped."""
    pairs = []
    for lineno, raw in lines:
        text = raw.strip()
        if not text or text.startswith("#"):
            continue
        if ";" not in text:
            raise ConfigError(f"{where} line {lineno}: expected 'formula ; justification'")
        formula, tag = text.rsplit(";", 1)
        pairs.append((formula.strip(), tag.strip()))
    return pairs


def _positions(path: str) -> dict:
    """(section, key) -> (line, column of the value); (section, None) -> (line, 1)."""
    pos = {}
    section = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.rstrip("\n")
            head = re.match(r"\s*\[([^\]]*)\]", text)
            if head:
                section = head.group(1)
                pos[(section, None)] = (lineno, 1)
                continue
            kv = re.match(r"(\s*)([^=:#;\s][^=:]*?)\s*[=:]\s*", text)
            if kv and section is not None:
                pos[(section, kv.group(2))] = (lineno, kv.end() + 1)
    return pos


def load_config(path: str | None) -> Config:
    cfg = Config()
    if path is None:
        return cfg
    cp = configparser.ConfigParser(interpolation=None, strict=True)
    cp.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
        pos = _positions(path)
    except configparser.MissingSectionHeaderError as e:
        raise ConfigError(f"{path}:{e.lineno}:1: no section header before first entry") from None
    except configparser.ParsingError as e:
        lineno = e.errors[0][0] if e.errors else "?"
        raise ConfigError(f"{path}:{lineno}:1: cannot parse line") from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as e:
        raise ConfigError(f"{path}:{e.lineno}:1: {e.message if hasattr(e, 'message') else e}") from None
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from None

    def at(section, key=None):
        line, col = pos.get((section, key), pos.get((section, None), ("?", 1)))
        return f"{path}:{line}:{col}"

    for section in cp.sections():
        if section not in _KEYS and section != "script":
            raise ConfigError(f"{at(section)}: unknown section [{section}]")

    if cp.has_section("setup"):
        s = cp["setup"]
        for key in s:
            if key not in _KEYS["setup"] and not key.startswith("cone."):
                raise ConfigError(f"{at('setup', key)}: unknown key {key!r} in [setup]")
        regions = _list(s.get("regions", "L, R"))
        counts = [_integer(x, at("setup", "measurements")) for x in _list(s.get("measurements", "2, 2"))]
        if len(counts) != len(regions):
            raise ConfigError(f"{at('setup', 'measurements')}: measurements needs one count per region")
        outcomes = _list(s.get("outcomes", "+, -"))
        try:
            cfg.setup = Setup(tuple(regions), dict(zip(regions, counts)), tuple(outcomes))
            future = {k[5:]: frozenset(_list(v)) for k, v in s.items() if k.startswith("cone.")}
            for r in future:
                if r not in regions:
                    raise SetupError(f"cone given for unknown region {r}")
            cfg.causal = CausalStructure(tuple(regions), future)
        except SetupError as e:
            raise ConfigError(f"{at('setup')}: {e}") from None

    if cp.has_section("model"):
        s = cp["model"]
        for key in s:
            if key not in _KEYS["model"] and not key.startswith("angle."):
                raise ConfigError(f"{at('model', key)}: unknown key {key!r} in [model]")
        cfg.mode = s.get("mode", cfg.mode).strip()
        if cfg.mode not in MODES:
            raise ConfigError(f"{at('model', 'mode')}: mode must be one of {', '.join(MODES)}")
        if "amplitudes" in s:
            re_parts = [_decimal(x, at("model", "amplitudes")) for x in _list(s["amplitudes"])]
            im_parts = [_decimal(x, at("model", "amplitudes_imag")) for x in _list(s.get("amplitudes_imag", ""))]
            if im_parts and len(im_parts) != len(re_parts):
                raise ConfigError(f"{at('model', 'amplitudes_imag')}: amplitudes_imag needs one entry per amplitude")
            im_parts = im_parts or [0.0] * len(re_parts)
            cfg.amplitudes = [complex(a, b) for a, b in zip(re_parts, im_parts)]
        for key, value in s.items():
            if key.startswith("angle."):
                m = re.fullmatch(r"angle\.([A-Za-z]+)(\d+)", key)
                if not m:
                    raise ConfigError(f"{at('model', key)}: bad angle key {key!r}")
                cfg.angles[(m.group(1), int(m.group(2)))] = _decimal(value, at("model", key))

    if cp.has_section("tolerances"):
        s = cp["tolerances"]
        for key in s:
            if key not in _KEYS["tolerances"]:
                raise ConfigError(f"{at('tolerances', key)}: unknown key {key!r} in [tolerances]")
        for key in _KEYS["tolerances"]:
            if key in s:
                setattr(cfg, key, _decimal(s[key], at("tolerances", key)))

    if cp.has_section("limits"):
        s = cp["limits"]
        for key in s:
            if key not in _KEYS["limits"]:
                raise ConfigError(f"{at('limits', key)}: unknown key {key!r} in [limits]")
        for key in _KEYS["limits"]:
            if key in s:
                setattr(cfg, key, _integer(s[key], at("limits", key)))

    if cp.has_section("script"):
        items = []
        for key, value in cp["script"].items():
            if not key.isdigit():
                raise ConfigError(f"{at('script', key)}: script keys must be line numbers, got {key!r}")
            items.append((int(key), value))
        items.sort()
        if [k for k, _ in items] != list(range(1, len(items) + 1)):
            raise ConfigError(f"{at('script')}: script lines must be numbered 1..n")
        cfg.script = parse_script_lines(items, f"{path} [script]")
    return cfg


def build_model(cfg: Config) -> semantics.Model:
    enumerate_logical_worlds(cfg.setup, cfg.max_worlds)  # capacity check before anything else
    if cfg.mode == "uniform":
        table = quantum.JointTable.uniform(cfg.setup, cfg.null_tolerance)
        return semantics.Model(cfg.setup, cfg.causal, table)
    if cfg.setup != HARDY_SETUP:
        raise ConfigError(f"mode {cfg.mode} needs the two-region, two-measurement, +/- setup")
    try:
        if cfg.mode in ("from-config", "explicit"):
            qm = quantum.build_hardy_model("from-config", amplitudes=cfg.amplitudes, angles=cfg.angles,
                                           null_tolerance=cfg.null_tolerance,
                                           validate=cfg.mode == "from-config")
        else:
            qm = quantum.build_hardy_model(cfg.mode, null_tolerance=cfg.null_tolerance)
    except quantum.ConfigInvalid as e:
        raise ConfigError(f"model: {e}") from None
    except ValueError as e:
        raise ConfigError(f"model: {e}") from None
    return semantics.Model.from_quantum(qm, cfg.causal)


def load_script(cfg: Config, option: str | None) -> proofcheck.ProofScript:
    try:
        if option is None and cfg.script is not None:
            return proofcheck.ProofScript.from_pairs(cfg.script, cfg.setup)
        if option is None or option == "builtin":
            return proofcheck.BUILTIN_SCRIPT
        try:
            with open(option, encoding="utf-8") as fh:
                pairs = parse_script_lines(enumerate(fh, start=1), option)
        except OSError as e:
            raise ConfigError(f"cannot read script {option}: {e.strerror}") from None
        return proofcheck.ProofScript.from_pairs(pairs, cfg.setup)
    except (FormulaSyntaxError, UnknownAtom, proofcheck.ScriptError) as e:
        raise ConfigError(f"script: {e}") from None


# -- reports --------------------------------------------------------------------

@dataclass
class Report:
    title: str
    verdicts: list[Verdict] = field(default_factory=list)
    text: list[str] = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return any(v.status == FAIL for v in self.verdicts)

    def render(self, machine: bool) -> str:
        if machine:
            return "\n".join(v.machine_line() for v in self.verdicts)
        out = [f"== {self.title} =="]
        out.extend(self.text)
        out.extend(v.machine_line() for v in self.verdicts)
        return "\n".join(out)


def _excluding_prediction(setup: Setup, w) -> str | None:
    if setup != HARDY_SETUP:
        return None
    for pred in quantum.HARDY_PREDICTIONS:
        if pred.kind == "zero" and setup.world(*pred.event) == w:
            return pred.tag
    return None


def cmd_worlds(m: semantics.Model, args) -> Report:
    r = Report("worlds")
    n, k = len(m.worlds), len(m.phys)
    r.text.append(f"{n} / {k} (logical / physical)")
    for idx, w in enumerate(m.worlds):
        mark = "" if idx in m.phys else "  excluded"
        r.text.append(f"  {m.describe(w)}  p={m.table.p(w):.6f}{mark}")
    r.verdicts.append(Verdict("worlds.logical", PASS, str(n)))
    r.verdicts.append(Verdict("worlds.physical", PASS, str(k)))
    for idx, w in enumerate(m.worlds):
        if idx in m.phys:
            continue
        tag = _excluding_prediction(m.setup, w)
        check = f"worlds.excluded{m.describe(w)}"
        r.verdicts.append(Verdict(check, PASS, f"by {tag}") if tag else Verdict(check, FLAG, "no prediction"))
    return r


def _needs_state(m: semantics.Model, r: Report, check: str) -> bool:
    if m.source is None:
        r.verdicts.append(Verdict(check, FLAG, "skipped: model has no quantum state"))
        return False
    return True


def cmd_quantum(m: semantics.Model, args) -> Report:
    r = Report("quantum")
    if m.setup == HARDY_SETUP:
        r.verdicts.extend(Verdict(f"quantum.{v.check}", v.status, v.detail)
                          for v in quantum.verify_predictions(m.setup, m.table, args.numeric_tolerance))
    if not _needs_state(m, r, "quantum.operators"):
        return r
    qm = m.source
    tol = args.numeric_tolerance
    lefts = qm.measurements.all_projectors("L")
    rights = qm.measurements.all_projectors("R")
    state = qm.state
    sig, com = [], []
    for (a, P1), (b, P2) in itertools.product(lefts, rights):
        d = max(quantum.verify_no_signaling(state, P1, P2, tolerance=tol),
                quantum.verify_no_signaling(state, P2, P1, tolerance=tol))
        sig.append(d)
        com.append(quantum.commutator_norm(P1, P2))
        r.text.append(f"  {a} | {b}: no-signaling deviation {d:.2e}, commutator {com[-1]:.2e}")
    r.verdicts.append(Verdict.of("quantum.no-signaling", max(sig) <= tol,
                                 f"{len(sig)} pairs max deviation {max(sig):.2e}"))
    r.verdicts.append(Verdict.of("quantum.microcausality", max(com) <= tol,
                                 f"{len(com)} pairs max commutator {max(com):.2e}"))
    worst = 0.0
    rho = state.density()
    for _, P in lefts + rights:
        yes, no = quantum.reduce(rho, P)
        worst = max(worst, abs(float(np.real(np.trace(yes) + np.trace(no) - np.trace(rho)))))
    r.verdicts.append(Verdict.of("quantum.reduce", worst <= tol, f"max branch-trace defect {worst:.2e}"))
    # why the precondition exists: same-region projectors from different bases
    P1, P2 = qm.measurements.projector("R", 1, 0), qm.measurements.projector("R", 2, 0)
    try:
        quantum.verify_no_signaling(state, P1, P2, tolerance=tol)
        r.verdicts.append(Verdict("quantum.precondition-demo", FLAG, "R1+ and R2+ commute in this model"))
    except quantum.PreconditionViolated as e:
        r.verdicts.append(Verdict("quantum.precondition-demo", FLAG,
                                  f"same-region pair rejected, deviation {e.deviation:.2e}"))
    return r


def cmd_lemmas(m: semantics.Model, args) -> Report:
    r = Report("lemmas")
    rng = random.Random(args.seed)
    r.text.append(f"seed {args.seed}: 1000 (2.1) triples, 100 vacuity cases, 200 identity cases")
    r.verdicts.append(semantics.verify_eq_2_1(m, rng, 1000))
    r.verdicts.append(semantics.verify_vacuity(m, rng, 100))
    r.verdicts.extend(semantics.verify_loc1_lemmas(m, rng=rng))
    r.verdicts.extend(semantics.verify_appendix_identities(m, rng, 200))
    if m.setup == HARDY_SETUP:
        p = m.parse
        try:
            semantics.loc1d_instance(m, p("L1"), p("R2+"), choice("R", 1), p("R1-"))
            r.verdicts.append(Verdict("side-condition-demo", FAIL, "B inside the cone was accepted"))
        except semantics.SideConditionViolated as e:
            r.verdicts.append(Verdict("side-condition-demo", FLAG, f"rejected: {e}"))
    return r


def _contested(line: proofcheck.ProofLine) -> bool:
    j = line.justification
    return line.number in proofcheck.CONTESTED and j.kind == "QM" and j.prediction == "3.4"


def cmd_proof(m: semantics.Model, args) -> Report:
    r = Report("proof")
    script = args.script_obj
    if m.setup != HARDY_SETUP:
        r.verdicts.append(Verdict("proof", FLAG, "skipped: proof needs the two-region setup"))
        return r
    rep = proofcheck.run_script(m, script, args.max_candidates)
    for line, lv in zip(script.lines, rep.lines):
        r.text.append(f"  {line.number:2d}. {line.text}  [{line.justification.tag}]")
        v = lv.verdict(m)
        if lv.status == FAIL and _contested(line):
            v = Verdict(v.check, FLAG, "plain-semantics=FAIL " + v.detail)
        r.verdicts.append(v)
    for v in rep.appendix:
        if v.check == "A.19" and v.status == FAIL:
            v = Verdict(v.check, FLAG, "literal=FAIL " + v.detail)
        r.verdicts.append(v)
    r.verdicts.extend(rep.contradiction.verdicts(m))
    res = rep.contradiction.unsat_11_14
    if res.status == "UNSAT":
        r.text.append(f"certificate C-11+C-14: {res.searched} of {res.space_size} candidates, "
                      f"{len(res.log)} violations logged")
        for v in res.log[:5]:
            r.text.append(f"  candidate {v.candidate}: {v.constraint} at {m.describe(v.world)} "
                          f"-> {m.describe(v.successor)}")
    r.verdicts.append(Verdict.of("proof.status", rep.status == proofcheck.THEOREM_REPLAYED, rep.status))
    return r


def cmd_histories(m: semantics.Model, args) -> Report:
    r = Report("histories")
    if m.setup != HARDY_SETUP:
        r.verdicts.append(Verdict("histories", FLAG, "skipped: histories need the two-region setup"))
        return r
    tree = histories.build_family(m)
    r.text.append(tree.to_text())
    r.text.append("leaf table:")
    r.text.extend(f"  {label}\t{w:.12f}" for label, w in tree.leaf_table())
    total = tree.total_weight()
    r.verdicts.append(Verdict.of("histories.leaf-sum", abs(total - 1) <= 1e-12, f"{total:.12f}"))
    if _needs_state(m, r, "histories.consistency"):
        worst = histories.check_consistency(histories.natural_family(m))
        r.verdicts.append(Verdict.of("histories.consistency", worst <= 1e-10, f"max |Re D| off-diagonal {worst:.2e}"))
        r.verdicts.append(Verdict("histories.functional", FLAG, "standard decoherence functional, external machinery"))
    l5 = histories.verify_histories_line5(tree)
    r.verdicts.append(Verdict.of("histories.line5", bool(l5),
                                 "reached " + ",".join("/".join(lf.labels) for lf in l5.reached)))
    r.verdicts.append(Verdict.of("histories.line5-start", l5.start_forced, "start leaves all L2+"))
    c = histories.verify_5_4_contradiction(tree)
    r.verdicts.append(Verdict.of("histories.5.4", c.verdict == histories.CONTRADICTION_REPRODUCED,
                                 f"{c.verdict} {c.summary()}"))
    stable = True
    for pol in histories.policies(m.setup, args.seed, 5):
        t = histories.build_family(m, pol)
        stable &= (bool(histories.verify_histories_line5(t)) == bool(l5)
                   and histories.verify_5_4_contradiction(t).verdict == c.verdict)
    r.verdicts.append(Verdict.of("histories.policy-invariance", stable, "5 random full-support policies"))
    return r


HANDLERS = {
    "worlds": cmd_worlds,
    "quantum": cmd_quantum,
    "lemmas": cmd_lemmas,
    "proof": cmd_proof,
    "histories": cmd_histories,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hardyworlds", description="Possible-worlds checks of a Hardy-type proof.")
    p.add_argument("command", choices=COMMANDS + ("all",))
    p.add_argument("--config", help="INI configuration file")
    p.add_argument("--script", help="'builtin' or a file of 'formula ; justification' lines")
    p.add_argument("--seed", type=int, default=0, help="seed for the randomized checks (default 0)")
    p.add_argument("--tolerance", type=float, help="override null_tolerance")
    p.add_argument("--machine", action="store_true", help="print verdict lines only")
    return p


def run(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.tolerance is not None:
            if not args.tolerance > 0:
                raise ConfigError("--tolerance must be positive")
            cfg.null_tolerance = args.tolerance
        m = build_model(cfg)
        args.script_obj = load_script(cfg, args.script)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except CapacityError as e:
        print(f"capacity exceeded: {e}", file=sys.stderr)
        return EXIT_CAPACITY
    args.numeric_tolerance = cfg.numeric_tolerance
    args.max_candidates = cfg.max_candidates

    commands = COMMANDS if args.command == "all" else (args.command,)
    failed = False
    for name in commands:
        try:
            report = HANDLERS[name](m, args)
        except CapacityError as e:
            print(f"capacity exceeded: {e}", file=sys.stderr)
            return EXIT_CAPACITY
        print(report.render(args.machine), file=out)
        failed |= report.failed
    return EXIT_FAIL if failed else EXIT_OK


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
