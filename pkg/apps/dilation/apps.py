from django.apps import AppConfig


class DilationConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "apps.dilation"
    label = "dilation"
