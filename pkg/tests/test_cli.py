"""Command-line behavior: exit codes, report shape, and replay.

The small model files used here have hand-checked verdicts. The toy
two-bit model passes both unwinding checks (its high action moves a
variable the low domain never observes); the leaky variant exposes
that variable, so `toggle` must fail local respect with observer `lo`
and fail bounded noninterference at length 1. The one-variable `roll`
model draws nondeterministically, so two identical states step to
observably different successors, which is exactly a step-consistency
violation. Those verdicts pin the exit codes, and every violation
report must replay back to the same condition.
"""

import inspect
import json
import subprocess

import pytest

from ifsec.cli import PARAM_DEFAULTS, main
from ifsec.models import ArincConfig, REGISTRY, build_auction, build_demo

TOY = """\
[domains]
hi
lo

[policy]
hi -> hi
lo -> hi
lo -> lo

[state]
x in {0, 1} = 0
y in {0, 1} = 0

[actions]
act poke lo
  x=0 -> x:=1
  x=1 -> x:=0

act toggle hi
  y=0 -> y:=1
  y=1 -> y:=0

[observe]
hi: x y
lo: x
"""

LEAKY = TOY.replace("lo: x\n", "lo: x y\n")

ROLL = """\
[domains]
lo

[policy]
lo -> lo

[state]
x in {0, 1} = 0

[actions]
act roll lo
  * -> x:=0
  * -> x:=1

[observe]
lo: x
"""

NO_REFLEXIVE = TOY.replace("lo -> hi\nlo -> lo\n", "lo -> hi\n")

ABSTRACT = """\
[domains]
hi
lo

[policy]
hi -> hi
lo -> hi
lo -> lo

[state]
x in {0, 1} = 0

[actions]
act poke lo
  x=0 -> x:=1
  x=1 -> x:=0

[observe]
hi: x
lo: x
"""

CONCRETE = """\
[domains]
hi
lo

[policy]
hi -> hi
lo -> hi
lo -> lo

[state]
x in {0, 1} = 0
y in {0, 1} = 0

[actions]
act cleanup hi
  y=1 -> y:=0

act dirty hi
  y=0 -> y:=1

act poke lo
  x=0 -> x:=1
  x=1 -> x:=0

[observe]
hi: x
lo: x
"""

PAIR = """\
[refinement]
concrete: concrete.ifs
abstract: abstract.ifs

[alpha]
match: x == x

[zeta]
cleanup -> tau
dirty -> tau
poke -> poke

[components]
cleanup: janitor
dirty: janitor
poke: worker

[rely janitor]
keeps: y

[guarantee janitor]
may: y

[rely worker]
keeps: x

[guarantee worker]
may: x
"""

# Janitor's guarantee frame no longer covers y, so its `dirty` step
# breaks the silent-step lemma.
PAIR_BAD_GUARANTEE = PAIR.replace(
    "[guarantee janitor]\nmay: y\n", "[guarantee janitor]\nmay: x\n")


@pytest.fixture()
def models(tmp_path):
    files = {
        "toy.ifs": TOY,
        "leaky.ifs": LEAKY,
        "roll.ifs": ROLL,
        "no_reflexive.ifs": NO_REFLEXIVE,
        "abstract.ifs": ABSTRACT,
        "concrete.ifs": CONCRETE,
        "pair.ifs": PAIR,
        "pair_badg.ifs": PAIR_BAD_GUARANTEE,
    }
    for name, text in files.items():
        (tmp_path / name).write_text(text, encoding="utf-8")
    return tmp_path


@pytest.fixture()
def run(capsys):
    def invoke(*argv):
        code = main(list(argv))
        captured = capsys.readouterr()
        return code, captured.out, captured.err
    return invoke


@pytest.fixture()
def saved_report(run, tmp_path):
    def save(*argv):
        code, out, _ = run(*argv, "--json")
        path = tmp_path / "report.json"
        path.write_text(out, encoding="utf-8")
        return code, str(path)
    return save


class TestList:
    def test_names_every_registry_entry(self, run):
        code, out, _ = run("list")
        assert code == 0
        for name in REGISTRY:
            assert name in out

    def test_json_shape(self, run):
        code, out, _ = run("list", "--json")
        assert code == 0
        data = json.loads(out)
        assert data["schema"] == 1
        assert data["command"] == "list"
        names = [m["name"] for m in data["models"]]
        assert names == list(REGISTRY)
        demo = data["models"][0]
        assert demo["params"] == {"threads": 3, "capacity": 1, "messages": 1}

    def test_defaults_agree_with_builder_signatures(self):
        demo = inspect.signature(build_demo).parameters
        assert PARAM_DEFAULTS["threads"] == demo["threads"].default
        assert PARAM_DEFAULTS["capacity"] == demo["capacity"].default
        assert PARAM_DEFAULTS["messages"] == demo["messages"].default
        auction = inspect.signature(build_auction).parameters
        assert PARAM_DEFAULTS["users"] == auction["users"].default
        # build_arinc takes capacity as an optional override; when it is
        # left out, every channel keeps the default topology's bound.
        bounds = set(ArincConfig().channel_capacity.values())
        assert bounds == {PARAM_DEFAULTS["capacity"]}

    def test_console_script_is_installed(self):
        proc = subprocess.run(["ifsec", "list"], capture_output=True,
                              text=True, check=False)
        assert proc.returncode == 0
        assert "demo" in proc.stdout


class TestExitCodes:
    def test_pass_is_zero(self, run, models):
        code, out, _ = run("check", "unwinding", str(models / "toy.ifs"))
        assert code == 0
        assert "verdict: PASS" in out

    def test_violation_is_one(self, run, models):
        code, out, _ = run("check", "unwinding", str(models / "leaky.ifs"))
        assert code == 1
        assert "lr: FAIL" in out

    def test_unknown_target_is_two(self, run):
        code, _, err = run("check", "unwinding", "nosuch")
        assert code == 2
        assert "unknown model or file" in err

    def test_parse_error_is_three(self, run, tmp_path):
        bad = tmp_path / "bad.ifs"
        bad.write_text("[state]\nx in {0} = 0\n", encoding="utf-8")
        code, _, err = run("check", "unwinding", str(bad))
        assert code == 3
        assert "hint:" in err

    def test_model_error_is_three(self, run, models):
        short = PAIR.split("[components]")[0].replace(
            "cleanup -> tau\n", "")
        (models / "short.ifs").write_text(short, encoding="utf-8")
        code, _, err = run("check", "refine", str(models / "short.ifs"))
        assert code == 3
        assert "cleanup" in err

    def test_budget_exhaustion_is_four(self, run, models):
        code, _, err = run("check", "unwinding", str(models / "toy.ifs"),
                           "--budget", "2")
        assert code == 4
        assert "budget" in err

    def test_invalid_kind_is_argparse_exit_two(self, models):
        with pytest.raises(SystemExit) as exc:
            main(["check", "nosuchkind", str(models / "toy.ifs")])
        assert exc.value.code == 2

    @pytest.mark.parametrize("argv", [
        ("check", "unwinding", "toy", "--max-len", "3"),
        ("check", "ni", "toy", "--universe"),
        ("check", "ni", "toy", "--depth", "2"),
        ("check", "refine", "toy", "--domain", "hi"),
        ("check", "refine", "toy", "--universe"),
        ("check", "compositional", "toy", "--depth", "2"),
    ])
    def test_stray_flag_is_two(self, run, models, argv):
        argv = [a if a != "toy" else str(models / "toy.ifs") for a in argv]
        code, _, err = run(*argv)
        assert code == 2
        assert "does not apply" in err

    def test_nonpositive_bound_is_two(self, run, models):
        code, _, err = run("check", "unwinding", str(models / "toy.ifs"),
                           "--depth", "0")
        assert code == 2
        assert "at least 1" in err

    def test_model_params_on_file_target_is_two(self, run, models):
        code, _, err = run("check", "unwinding", str(models / "toy.ifs"),
                           "--threads", "2")
        assert code == 2
        assert "built-in" in err

    def test_unknown_param_for_model_is_two(self, run):
        code, _, err = run("check", "unwinding", "arinc", "--users", "2")
        assert code == 2
        assert "does not take parameter" in err

    def test_unknown_domain_is_two(self, run, models):
        code, _, err = run("check", "unwinding", str(models / "toy.ifs"),
                           "--domain", "nosuch")
        assert code == 2
        assert "unknown domain" in err

    def test_universe_without_declared_space_is_two(self, run):
        code, _, err = run("check", "unwinding", "arinc", "--universe")
        assert code == 2
        assert "universe" in err

    def test_compositional_without_contracts_is_two(self, run, models):
        bare = PAIR.split("[components]")[0]
        (models / "bare.ifs").write_text(bare, encoding="utf-8")
        code, _, err = run("check", "compositional", str(models / "bare.ifs"))
        assert code == 2
        assert "contracts" in err

    def test_model_file_where_refinement_expected_is_three(self, run, models):
        code, _, err = run("check", "refine", str(models / "toy.ifs"))
        assert code == 3


class TestCheckBehavior:
    def test_domain_filter_hides_the_leak(self, run, models):
        leaky = str(models / "leaky.ifs")
        code_all, _, _ = run("check", "unwinding", leaky)
        code_hi, _, _ = run("check", "unwinding", leaky, "--domain", "hi")
        assert (code_all, code_hi) == (1, 0)

    def test_universe_scope_is_reported(self, run, models):
        code, out, _ = run("check", "unwinding", str(models / "toy.ifs"),
                           "--universe")
        assert code == 0
        assert "scope: universe" in out

    def test_ni_reports_trace_counts(self, run, models):
        code, out, _ = run("check", "ni", str(models / "toy.ifs"),
                           "--max-len", "2", "--json")
        assert code == 0
        data = json.loads(out)
        # 1 empty trace, 2 of length one, 4 of length two.
        assert data["counters"]["model_traces"] == 7

    def test_refinement_file_runs_all_conditions(self, run, models):
        code, out, _ = run("check", "refine", str(models / "pair.ifs"),
                           "--json")
        assert code == 0
        data = json.loads(out)
        names = [c["name"] for c in data["checks"]]
        assert names == ["c1", "c2", "c3", "c4", "c5", "c6",
                         "refinement", "cross-check",
                         "concrete-lr", "concrete-sc",
                         "abstract-lr", "abstract-sc"]

    def test_compositional_file_runs_lemmas(self, run, models):
        code, out, _ = run("check", "compositional", str(models / "pair.ifs"),
                           "--json")
        assert code == 0
        names = [c["name"] for c in json.loads(out)["checks"]]
        assert names == ["lemma1", "lemma2", "lemma3", "lemma4",
                         "cross-check"]

    def test_missing_reflexive_edge_warns_on_stderr(self, run, models):
        _, _, err = run("check", "unwinding",
                        str(models / "no_reflexive.ifs"))
        assert "no reflexive policy edge" in err
        assert "lo" in err


class TestReportShape:
    def test_file_target_report(self, run, models):
        code, out, _ = run("check", "unwinding", str(models / "leaky.ifs"),
                           "--json")
        assert code == 1
        data = json.loads(out)
        assert data["schema"] == 1
        assert data["command"] == "check"
        assert data["kind"] == "unwinding"
        assert data["verdict"] == "fail"
        assert data["exit_code"] == 1
        model = data["model"]
        assert model["source"] == "file"
        digest = model["files"][str(models / "leaky.ifs")]
        assert len(digest) == 64 and set(digest) <= set("0123456789abcdef")
        lr = data["checks"][0]
        assert lr["name"] == "lr" and lr["status"] == "fail"
        assert lr["witness"]["type"] == "lr"
        assert lr["witness"]["action"] == "toggle"
        assert lr["witness"]["domain"] == "lo"

    def test_builtin_target_report(self, run):
        code, out, _ = run("check", "unwinding", "arinc",
                           "--capacity", "2", "--json")
        assert code == 0
        model = json.loads(out)["model"]
        assert model["source"] == "builtin"
        assert model["name"] == "arinc"
        assert model["params"] == {"capacity": 2}
        assert model["build_params"]["variant"] == "secure"

    def test_options_are_echoed(self, run, models):
        _, out, _ = run("check", "ni", str(models / "toy.ifs"),
                        "--max-len", "2", "--budget", "500", "--json")
        options = json.loads(out)["options"]
        assert options == {"depth": None, "max_len": 2, "domain": None,
                           "universe": False, "budget": 500}

    def test_reports_are_deterministic(self, run, models):
        argv = ("check", "unwinding", str(models / "leaky.ifs"), "--json")
        _, first, _ = run(*argv)
        _, second, _ = run(*argv)

        def strip(text):
            return [line for line in text.splitlines()
                    if "wall_time_s" not in line]

        assert strip(first) == strip(second)
        assert first != ""


class TestReplay:
    def test_lr_witness_reproduces(self, run, saved_report, models):
        code, report = saved_report("check", "unwinding",
                                    str(models / "leaky.ifs"))
        assert code == 1
        code, out, _ = run("replay", report)
        assert code == 0
        assert "reproduced lr" in out
        assert "'toggle'" in out and "'lo'" in out

    def test_sc_witness_reproduces(self, run, saved_report, models):
        code, report = saved_report("check", "unwinding",
                                    str(models / "roll.ifs"))
        assert code == 1
        code, out, _ = run("replay", report)
        assert code == 0
        assert "reproduced sc" in out

    def test_ni_witness_reproduces(self, run, saved_report, models):
        code, report = saved_report("check", "ni", str(models / "leaky.ifs"))
        assert code == 1
        code, out, _ = run("replay", report)
        assert code == 0
        assert "reproduced ni" in out
        assert "full trace" in out and "purged trace" in out

    def test_c2_witness_reproduces_on_builtin(self, run, saved_report):
        code, report = saved_report("check", "refine",
                                    "demo-insecure-counter",
                                    "--threads", "2")
        assert code == 1
        data = json.loads(open(report, encoding="utf-8").read())
        c2 = [c for c in data["checks"] if c["name"] == "c2"][0]
        assert c2["status"] == "fail"
        assert c2["witness"]["trace"][-1].endswith("/incr")
        code, out, _ = run("replay", report)
        assert code == 0
        assert "reproduced c2" in out

    def test_lemma_witness_reproduces(self, run, saved_report, models):
        code, report = saved_report("check", "compositional",
                                    str(models / "pair_badg.ifs"))
        assert code == 1
        code, out, _ = run("replay", report)
        assert code == 0
        assert "reproduced lemma1" in out
        assert "janitor" in out

    def test_lr_witness_on_builtin_reproduces(self, run, saved_report):
        code, report = saved_report("check", "unwinding", "arinc-port-id")
        assert code == 1
        code, out, _ = run("replay", report)
        assert code == 0
        assert "reproduced lr" in out

    def test_json_output(self, run, saved_report, models):
        _, report = saved_report("check", "unwinding",
                                 str(models / "leaky.ifs"))
        code, out, _ = run("replay", report, "--json")
        assert code == 0
        data = json.loads(out)
        assert data["command"] == "replay"
        assert data["condition"] == "lr"
        assert data["reproduced"] is True

    def test_pass_report_is_rejected(self, run, saved_report, models):
        code, report = saved_report("check", "unwinding",
                                    str(models / "toy.ifs"))
        assert code == 0
        code, _, err = run("replay", report)
        assert code == 2
        assert "records a pass" in err

    def test_changed_model_file_is_stale(self, run, saved_report, models):
        _, report = saved_report("check", "unwinding",
                                 str(models / "leaky.ifs"))
        (models / "leaky.ifs").write_text(TOY, encoding="utf-8")
        code, _, err = run("replay", report)
        assert code == 2
        assert "stale" in err

    def test_missing_model_file_is_stale(self, run, saved_report, models):
        _, report = saved_report("check", "unwinding",
                                 str(models / "leaky.ifs"))
        (models / "leaky.ifs").unlink()
        code, _, err = run("replay", report)
        assert code == 2
        assert "stale" in err

    def test_unknown_builtin_is_rejected(self, run, saved_report, tmp_path):
        _, report = saved_report("check", "unwinding", "arinc-queuing-mode")
        data = json.loads(open(report, encoding="utf-8").read())
        data["model"]["name"] = "nosuch"
        edited = tmp_path / "edited.json"
        edited.write_text(json.dumps(data), encoding="utf-8")
        code, _, err = run("replay", str(edited))
        assert code == 2
        assert "unknown model" in err

    def test_non_json_file_is_rejected(self, run, models):
        code, _, err = run("replay", str(models / "toy.ifs"))
        assert code == 2
        assert "not a JSON run report" in err

    def test_wrong_schema_is_rejected(self, run, tmp_path):
        path = tmp_path / "wrong_schema.json"
        path.write_text(json.dumps({"schema": 2, "command": "check"}),
                        encoding="utf-8")
        code, _, err = run("replay", str(path))
        assert code == 2
        assert "schema" in err

    def test_list_report_is_rejected(self, run, saved_report):
        _, report = saved_report("list")
        code, _, err = run("replay", report)
        assert code == 2
        assert "ifsec check" in err
