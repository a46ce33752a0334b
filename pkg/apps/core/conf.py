from django.conf import settings

_DEFAULTS = {
    "OUTPUT_DIR": "reports",
    "ROOT_TOLERANCE": 1e-12,
    "NYQUIST_TOLERANCE": 1e-12,
    "BOUNDARY_SUP_TARGET": 1e-8,
    "MEAN_TOLERANCE": 1e-8,
    "FFT_WORKERS": -1,
}


def analysis_setting(name):
    """Read ``settings.ANALYSIS[name]``, falling back to the built-in default.

    Works when Django settings are not configured, so the numerical modules can be
    imported from a plain interpreter as well.
    """
    if settings.configured:
        overrides = getattr(settings, "ANALYSIS", {})
        if name in overrides:
            return overrides[name]
    return _DEFAULTS[name]
