from django.urls import path
from .views import ExperimentList, ExperimentRun, RhoEvaluate

# api/v1/...
urlpatterns = [
    path("experiments/", ExperimentList.as_view(), name="experiment-list"),
    path("experiments/<slug:name>/run/", ExperimentRun.as_view(), name="experiment-run"),
    path("rho/", RhoEvaluate.as_view(), name="rho-evaluate"),
]
