import hashlib
import json
import os
import tempfile
from io import StringIO

from django.core.management import CommandError, call_command
from django.test import SimpleTestCase, TestCase, override_settings

from nodalvar.config import KERNEL_CURVE, MC_NODAL, VARIANCE, GRule, load_config, parse_lines
from nodalvar.errors import ConfigError
from nodalvar.models import ExperimentRun

KERNEL_CONFIG = """\
# Γ along a short ψ range
command = kernel-curve
n_list = 10, 50
g_rule = const(0.2)
psi_range = 1, 10, 4
"""


class ConfigParsingTests(SimpleTestCase):
    def test_parse_lines(self):
        entries = parse_lines("N_LIST = 10, 20  # comment\n\n# only a comment\ng_rule=single\n")
        self.assertEqual(entries, {"n_list": ("10, 20", 1), "g_rule": ("single", 4)})

    def test_parse_errors_carry_line_numbers(self):
        with self.assertRaises(ConfigError) as caught:
            parse_lines("n_list = 10\nbogus = 1\nnot a pair\nn_list = 20\n")
        lines = [line for line, _ in caught.exception.problems]
        self.assertEqual(lines, [2, 3, 4])
        self.assertIn("line 2: unknown key 'bogus'", str(caught.exception))

    def test_g_rules(self):
        self.assertEqual(GRule.parse("const(0.2)"), GRule("const", 0.2))
        self.assertAlmostEqual(GRule.parse("power( -0.5 )").g_for(100), 0.1, places=15)
        self.assertEqual(GRule.parse("single").g_for(40), 0.0)
        self.assertEqual(str(GRule.parse("power(-0.5)")), "power(-0.5)")
        for text in ("linear(2)", "const()", "const(inf)"):
            with self.assertRaises(ValueError):
                GRule.parse(text)

    def test_load_config(self):
        config = load_config(KERNEL_CONFIG, KERNEL_CURVE)
        self.assertEqual(config.n_list, (10, 50))
        self.assertEqual(config.windows(), [(10, 0.2), (50, 0.2)])
        self.assertEqual(config.psi_range.values(), [1.0, 4.0, 7.0, 10.0])
        self.assertEqual((config.format, config.tol, config.timing), ("csv", 1e-6, False))
        self.assertEqual(config.digest, hashlib.sha256(KERNEL_CONFIG.encode()).hexdigest())

    def assertConfigProblem(self, text, command, line, fragment):
        with self.assertRaises(ConfigError) as caught:
            load_config(text, command)
        matches = [p for p in caught.exception.problems if p[0] == line and fragment in p[1]]
        self.assertTrue(matches, msg=f"{caught.exception.problems!r}")

    def test_validation_problems(self):
        self.assertConfigProblem("n_list = 10\n", KERNEL_CURVE, None, "needs 'g_rule'")
        self.assertConfigProblem("n_list = 10\ng_rule = const(0.2)\nsamples = 5\n", MC_NODAL, None,
                                 "needs 'seed'")
        self.assertConfigProblem("n_list = 10\ng_rule = const(0.2)\npsi_range = 1, 100, 3\n", KERNEL_CURVE,
                                 3, "max must not exceed")
        self.assertConfigProblem("n_list = 10\ng_rule = const(0.05)\n", VARIANCE, 2, "fewer than two")
        self.assertConfigProblem("command = variance\nn_list = 10\ng_rule = const(0.2)\npsi_range = 1, 2, 2\n",
                                 KERNEL_CURVE, 1, "config is for 'variance'")
        self.assertConfigProblem("n_list = 10\ng_rule = const(0.2)\nsamples = 1\nseed = 4\n", MC_NODAL, 3,
                                 "at least two")
        self.assertConfigProblem("n_list = 10\ng_rule = const(0.2)\ntol = 2\n", VARIANCE, 3, "tol must lie")
        self.assertConfigProblem("n_list = 10\ng_rule = single\n", "chaos2", 2, "band window")
        self.assertConfigProblem("n_list = 10, 20\ng_rule = const(0.2)\nsamples = 4\nseed = 1\n"
                                 "raw_dump = lengths.csv\n", MC_NODAL, 5, "placeholder")


class CommandTests(SimpleTestCase):
    def setUp(self):
        directory = tempfile.TemporaryDirectory()
        self.addCleanup(directory.cleanup)
        self.directory = directory.name

    def write_config(self, text, name="experiment.conf"):
        path = os.path.join(self.directory, name)
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text)
        return path

    def run_command(self, *args, **options):
        out = StringIO()
        call_command("nodalvar", *args, stdout=out, stderr=StringIO(), verbosity=0, **options)
        return out.getvalue()

    def test_kernel_curve_csv(self):
        config = self.write_config(KERNEL_CONFIG)
        out_path = os.path.join(self.directory, "curve.csv")
        self.run_command("kernel-curve", config=config, out=out_path)
        with open(out_path, "rb") as handle:
            content = handle.read()
        self.assertTrue(content.startswith(b"# schema=1\r\nn,g,psi,theta,gamma_exact,gamma_cd,"))
        self.assertEqual(len(content.splitlines()), 2 + 8)
        second = os.path.join(self.directory, "again.csv")
        self.run_command("kernel-curve", config=config, out=second)
        with open(second, "rb") as handle:
            self.assertEqual(handle.read(), content)

    def test_rows_to_stdout_as_json(self):
        config = self.write_config(KERNEL_CONFIG + "format = json\n")
        rows = json.loads(self.run_command("kernel-curve", config=config))
        self.assertEqual(len(rows), 8)
        self.assertEqual((rows[0]["n"], rows[0]["psi"]), (10, 1.0))
        self.assertLess(rows[0]["residual_cd"], 1e-8)

    def test_config_error_exit_code(self):
        config = self.write_config("n_list = 10\n")
        with self.assertRaises(CommandError) as caught:
            self.run_command("kernel-curve", config=config)
        self.assertEqual(caught.exception.returncode, 2)
        with self.assertRaises(CommandError) as caught:
            self.run_command("variance", config=os.path.join(self.directory, "missing.conf"))
        self.assertEqual(caught.exception.returncode, 2)
        with self.assertRaises(CommandError) as caught:
            self.run_command("variance")
        self.assertEqual(caught.exception.returncode, 2)

    def test_selfcheck(self):
        output = self.run_command("selfcheck")
        lines = output.splitlines()
        self.assertTrue(lines)
        self.assertTrue(all(line.startswith("PASS ") for line in lines), msg=output)
        self.assertTrue(any(line.startswith("PASS window_constants") for line in lines))

    def test_kacrice_curve(self):
        config = self.write_config(
            "n_list = 100\ng_rule = const(0.1)\npsi_range = 10, 20, 3\nformat = json\n"
        )
        rows = json.loads(self.run_command("kacrice-curve", config=config))
        self.assertEqual([row["psi"] for row in rows], [10.0, 15.0, 20.0])
        self.assertTrue(all(row["oracle"] == "quadrature" and row["seed"] is None for row in rows))
        self.assertTrue(all(row["oracle_stderr"] == 0.0 for row in rows))

    def test_mc_nodal_with_raw_dump(self):
        dump = os.path.join(self.directory, "lengths-{n}.csv")
        config = self.write_config(
            f"n_list = 10\ng_rule = const(0.2)\nsamples = 6\nseed = 3\nbootstrap = 10\n"
            f"format = json\nraw_dump = {dump}\n"
        )
        rows = json.loads(self.run_command("mc-nodal", config=config))
        self.assertEqual(len(rows), 1)
        self.assertEqual((rows[0]["n_samples"], rows[0]["seed"]), (6, 3))
        self.assertNotIn("wall_time", rows[0])
        with open(os.path.join(self.directory, "lengths-10.csv")) as handle:
            self.assertEqual(len(handle.read().splitlines()), 6)

    def test_variance_timing_column(self):
        base = "n_list = 10\ng_rule = const(0.2)\nk_method = oracle\n"
        plain = self.run_command("variance", config=self.write_config(base, "plain.conf"))
        timed = self.run_command("variance", config=self.write_config(base + "timing = true\n", "timed.conf"))
        self.assertNotIn("wall_time", plain.splitlines()[1])
        self.assertIn("wall_time", timed.splitlines()[1])
        self.assertEqual(len(plain.splitlines()), 3)

    def test_chaos2(self):
        config = self.write_config("n_list = 10000\ng_rule = const(0.01)\nformat = json\n")
        rows = json.loads(self.run_command("chaos2", config=config))
        self.assertGreaterEqual(rows[0]["ratio"], 0.9)
        self.assertLessEqual(rows[0]["ratio"], 1.1)
        self.assertIsNone(rows[0]["h2_mc"])


@override_settings(NODALVAR={"RECORD_RUNS": True, "WORKERS": 1})
class RunLedgerTests(TestCase):
    def test_successful_run_is_recorded(self):
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "experiment.conf")
            with open(path, "w", encoding="utf-8") as handle:
                handle.write(KERNEL_CONFIG)
            call_command("nodalvar", "kernel-curve", config=path, stdout=StringIO(), verbosity=0)
        run = ExperimentRun.objects.get()
        self.assertEqual((run.command, run.exit_code, run.row_count), ("kernel-curve", 0, 8))
        self.assertEqual(run.config_sha256, hashlib.sha256(KERNEL_CONFIG.encode()).hexdigest())
        self.assertIsNone(run.out_path)
        self.assertIsNotNone(run.finished_at)

    def test_config_error_is_recorded(self):
        with self.assertRaises(CommandError):
            call_command("nodalvar", "variance", stdout=StringIO(), verbosity=0)
        run = ExperimentRun.objects.get()
        self.assertEqual((run.command, run.exit_code), ("variance", 2))
        self.assertIn("--config is required", run.message)

    @override_settings(NODALVAR={"RECORD_RUNS": False, "WORKERS": 1})
    def test_nothing_recorded_by_default(self):
        call_command("nodalvar", "selfcheck", stdout=StringIO(), verbosity=0)
        self.assertFalse(ExperimentRun.objects.exists())
