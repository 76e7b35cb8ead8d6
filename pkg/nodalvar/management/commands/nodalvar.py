import logging
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from django.utils import timezone

from nodalvar import runner
from nodalvar.config import COMMANDS, SELFCHECK, load_config
from nodalvar.errors import ConfigError, NodalVarError
from nodalvar.models import ExperimentRun

logger = logging.getLogger(__name__)

VERBOSITY_LEVELS = {0: logging.WARNING, 1: logging.INFO}


class Command(BaseCommand):
    help = (
        "Run a nodal-length experiment described by a key = value config file "
        "and write its rows as CSV or JSON."
    )

    def add_arguments(self, parser):
        parser.add_argument("experiment", choices=COMMANDS)
        parser.add_argument("--config", help="Path of the experiment config file.")
        parser.add_argument("--out", help="Artifact path; overrides out_path from the config.")

    def handle(self, *args, **options):
        verbosity = options["verbosity"]
        logging.getLogger("nodalvar").setLevel(VERBOSITY_LEVELS.get(verbosity, logging.DEBUG))
        command = options["experiment"]
        run = self._start(command)
        text = ""
        try:
            text = self._read_config(options["config"], command)
            config = load_config(text, command)
        except ConfigError as exc:
            if run is not None:
                run.config_text = text
            self._finish(run, 2, str(exc))
            raise CommandError(f"config error: {exc}", returncode=2)
        if run is not None:
            run.config_text = config.text
            run.config_sha256 = config.digest
        out_path = options["out"] or config.out_path
        workers = config.workers or settings.NODALVAR["WORKERS"]
        try:
            result = runner.run(config, workers=workers, progress=verbosity >= 2)
        except NodalVarError as exc:
            logger.error("%s failed: %s", command, exc)
            self._finish(run, 1, str(exc), out_path=out_path, fmt=config.format)
            raise CommandError(f"{command} failed: {exc}", returncode=1)
        if command == SELFCHECK:
            for row in result.rows:
                status = "PASS" if row["passed"] else "FAIL"
                self.stdout.write(f"{status} {row['name']}: {row['detail']}")
        if out_path:
            Path(out_path).write_bytes(result.content)
            self.stdout.write(f"wrote {len(result.rows)} rows to {out_path}")
        elif command != SELFCHECK:
            self.stdout.write(result.content.decode("utf-8"), ending="")
        self._finish(run, result.exit_code, result.message, out_path=out_path,
                     fmt=config.format, rows=len(result.rows))
        if result.exit_code:
            raise CommandError(result.message, returncode=result.exit_code)

    def _read_config(self, path, command):
        if path is None:
            if command == SELFCHECK:
                return ""
            raise ConfigError([(None, "--config is required")])
        try:
            return Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError([(None, f"cannot read {path}: {exc.strerror}")])

    def _start(self, command):
        if not settings.NODALVAR["RECORD_RUNS"]:
            return None
        return ExperimentRun(command=command, config_sha256="", started_at=timezone.now())

    def _finish(self, run, exit_code, message, out_path=None, fmt="", rows=None):
        if run is None:
            return
        run.exit_code = exit_code
        run.message = message
        run.out_path = out_path
        run.output_format = fmt
        run.row_count = rows
        run.finished_at = timezone.now()
        run.save()
