"""
Django settings for the anisotropic harmonic-analysis laboratory.

The project has no persistent models and configures no database. Numerical
defaults live in ``ANALYSIS`` below, experiment parameters come from JSON config documents
(see apps.harness).
"""

from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = "django-insecure-aniso-lab-local-only"

DEBUG = True

ALLOWED_HOSTS = ["localhost", "127.0.0.1", "testserver"]


# Application definition

INSTALLED_APPS = [
    "django.contrib.contenttypes",
    "django.contrib.auth",
    "drf_spectacular",
    "rest_framework",
    "apps.core",
    "apps.dilation",
    "apps.field",
    "apps.kernels",
    "apps.operators",
    "apps.decomposition",
    "apps.harness",
]

MIDDLEWARE = [
    "django.middleware.security.SecurityMiddleware",
    "django.middleware.common.CommonMiddleware",
]

ROOT_URLCONF = "config.urls"

TEMPLATES = [
    {
        "BACKEND": "django.template.backends.django.DjangoTemplates",
        "DIRS": [],
        "APP_DIRS": True,
        "OPTIONS": {
            "context_processors": [
                "django.template.context_processors.request",
            ],
        },
    },
]

WSGI_APPLICATION = "config.wsgi.application"


# Database
# Nothing is stored, so Django falls back to its dummy backend.

DATABASES = {}


LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True

STATIC_URL = "static/"

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

REST_FRAMEWORK = {
    "DEFAULT_SCHEMA_CLASS": "drf_spectacular.openapi.AutoSchema",
    "DEFAULT_AUTHENTICATION_CLASSES": [],
    "DEFAULT_PERMISSION_CLASSES": ["rest_framework.permissions.AllowAny"],
    "UNAUTHENTICATED_USER": None,
}

SPECTACULAR_SETTINGS = {
    "TITLE": "Anisotropic harmonic-analysis laboratory",
    "DESCRIPTION": "Quasi-norms, spectral multipliers, square functions and "
                   "Calderon-Zygmund decompositions on periodic grids.",
    "VERSION": "1.0.0",
}


# Numerical defaults. Experiment configs override these per run.

ANALYSIS = {
    "OUTPUT_DIR": BASE_DIR / "reports",
    "ROOT_TOLERANCE": 1e-12,
    "NYQUIST_TOLERANCE": 1e-12,
    "BOUNDARY_SUP_TARGET": 1e-8,
    "MEAN_TOLERANCE": 1e-8,
    "FFT_WORKERS": -1,
}


LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "{asctime} {levelname} {name}: {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "verbose",
        },
    },
    "loggers": {
        "apps": {
            "handlers": ["console"],
            "level": "INFO",
            "propagate": False,
        },
    },
}
