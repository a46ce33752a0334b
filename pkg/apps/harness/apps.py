from django.apps import AppConfig


class HarnessConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "apps.harness"
    label = "harness"

    def ready(self):
        # importing the experiment modules fills the registry
        import apps.harness.experiments  # noqa: F401
