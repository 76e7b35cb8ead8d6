from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="ExperimentRun",
            fields=[
                ("id", models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name="ID")),
                ("command", models.CharField(help_text="Experiment command, e.g. 'variance' or 'mc-nodal'.", max_length=32)),
                ("config_text", models.TextField(blank=True, help_text="Raw text of the config file as read.")),
                ("config_sha256", models.CharField(db_index=True, help_text="SHA-256 of config_text; equal digests give byte-identical artifacts.", max_length=64)),
                ("out_path", models.CharField(blank=True, help_text="Artifact path, or null when the rows went to stdout.", max_length=1024, null=True)),
                ("output_format", models.CharField(blank=True, help_text="Artifact format (csv or json).", max_length=8)),
                ("row_count", models.IntegerField(help_text="Number of rows written.", null=True)),
                ("exit_code", models.IntegerField(help_text="0 success, 1 invariant or convergence failure, 2 config error.", null=True)),
                ("message", models.TextField(blank=True, help_text="Summary line or error message.")),
                ("started_at", models.DateTimeField(help_text="When the command started.")),
                ("finished_at", models.DateTimeField(help_text="When the command finished.", null=True)),
            ],
            options={
                "db_table": "experiment_runs",
                "ordering": ["-started_at"],
            },
        ),
    ]
