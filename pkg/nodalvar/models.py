from django.db import models


class ExperimentRun(models.Model):
    """
    One invocation of the `nodalvar` management command.

    Written only when NODALVAR_RECORD_RUNS is set; the computed numbers live in
    the artifact, the ledger only says what was run and how it ended.
    """
    command = models.CharField(
        max_length=32,
        help_text="Experiment command, e.g. 'variance' or 'mc-nodal'."
        )
    config_text = models.TextField(
        blank=True,
        help_text="Raw text of the config file as read."
        )
    config_sha256 = models.CharField(
        max_length=64,
        db_index=True,
        help_text="SHA-256 of config_text; equal digests give byte-identical artifacts."
        )
    out_path = models.CharField(
        max_length=1024,
        blank=True,
        null=True,
        help_text="Artifact path, or null when the rows went to stdout."
        )
    output_format = models.CharField(
        max_length=8,
        blank=True,
        help_text="Artifact format (csv or json)."
        )
    row_count = models.IntegerField(
        null=True,
        help_text="Number of rows written."
        )
    exit_code = models.IntegerField(
        null=True,
        help_text="0 success, 1 invariant or convergence failure, 2 config error."
        )
    message = models.TextField(
        blank=True,
        help_text="Summary line or error message."
        )
    started_at = models.DateTimeField(
        help_text="When the command started."
        )
    finished_at = models.DateTimeField(
        null=True,
        help_text="When the command finished."
        )

    class Meta:
        db_table = "experiment_runs"
        ordering = ["-started_at"]

    def __str__(self):
        return f"{self.command} ({self.config_sha256[:12]}) exit {self.exit_code}"
