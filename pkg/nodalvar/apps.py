import logging

from django.apps import AppConfig


class NodalVarConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "nodalvar"
    verbose_name = "Nodal length variance"

    def ready(self):
        # regime warnings from the asymptotic evaluators end up in the log
        logging.captureWarnings(True)
