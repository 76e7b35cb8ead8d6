"""
Django settings for the nodalvar project.

The project has no web surface: Django provides configuration, logging, the
management command runner, the test runner and the optional run ledger.
Everything is read from the environment (or a .env file next to this one)
through django-environ.
"""

from pathlib import Path
import environ

env = environ.Env()
env.read_env()

BASE_DIR = Path(__file__).resolve().parent

SECRET_KEY = env("DJANGO_SECRET_KEY", default="nodalvar-development-key")

DEBUG = env.bool("DEBUG", default=False)

ALLOWED_HOSTS = env.list(
    "DJANGO_ALLOWED_HOSTS",
    default=["127.0.0.1", "localhost"],
)

INSTALLED_APPS = [
    "django.contrib.auth",
    "django.contrib.contenttypes",
    "django_extensions",
    "rest_framework",
    # our apps
    "nodalvar",
]


# Database
# https://docs.djangoproject.com/en/6.0/ref/settings/#databases
# A postgres:// DATABASE_URL runs the ledger on PostgreSQL through psycopg.

DATABASES = {
    "default": env.db(
        "DATABASE_URL",
        default=f"sqlite:///{BASE_DIR / 'nodalvar.sqlite3'}",
    )
}


# Internationalization
# https://docs.djangoproject.com/en/6.0/topics/i18n/

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = False


# Default primary key field type
# https://docs.djangoproject.com/en/6.0/ref/settings/#default-auto-field

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"


REST_FRAMEWORK = {
    "DEFAULT_RENDERER_CLASSES": [
        "rest_framework.renderers.JSONRenderer",
    ],
    "UNAUTHENTICATED_USER": None,
}


# Experiments
# None of these change a computed number; experiments are fully described by
# their config files.

NODALVAR = {
    "RECORD_RUNS": env.bool("NODALVAR_RECORD_RUNS", default=False),
    "WORKERS": env.int("NODALVAR_WORKERS", default=1),
}

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {
            "format": "{asctime} {levelname} {name}: {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "stream": "ext://sys.stderr",
            "formatter": "plain",
        },
    },
    "loggers": {
        "nodalvar": {
            "handlers": ["console"],
            "level": env("NODALVAR_LOG_LEVEL", default="INFO"),
            "propagate": False,
        },
        "py.warnings": {
            "handlers": ["console"],
            "level": "WARNING",
            "propagate": False,
        },
    },
}
