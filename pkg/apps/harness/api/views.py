import logging

from rest_framework import status
from rest_framework.permissions import AllowAny
from rest_framework.response import Response
from rest_framework.views import APIView
from drf_spectacular.utils import extend_schema, OpenApiExample, OpenApiParameter

from apps.core.exceptions import AnalysisError, UnknownExperiment
from apps.dilation.geometry import DilationGroup
from apps.harness.registry import build_config, registered
from apps.harness.report import emit_report
from apps.harness.runner import run_experiment
from .serializers import (ExperimentConfigSerializer, ExperimentSummarySerializer,
                          ReportSerializer, RhoRequestSerializer, RhoResultSerializer)

logger = logging.getLogger(__name__)


class ExperimentList(APIView):
    """
    API View for listing the registered experiments.

    URLs:
        - GET  /api/v1/experiments/      : Names, summaries and default configs
    """
    permission_classes = [AllowAny]

    @extend_schema(
        summary="List all experiments",
        responses=ExperimentSummarySerializer(many=True),
    )
    def get(self, request):
        """
        Returns:
            - 200 OK: One entry per experiment, sorted by name.
        """
        serializer = ExperimentSummarySerializer([e.as_dict() for e in registered()], many=True)
        return Response(serializer.data)


class ExperimentRun(APIView):
    """
    API View for running one experiment synchronously.

    URLs:
        - POST /api/v1/experiments/<slug:name>/run/      : Run with the posted config
    """
    permission_classes = [AllowAny]

    @extend_schema(
        summary="Run an experiment",
        request=ExperimentConfigSerializer,
        responses={200: ReportSerializer},
        parameters=[OpenApiParameter("name", str, OpenApiParameter.PATH)],
        examples=[
            OpenApiExample(
                "Parabolic Parseval check",
                value={"exponents": [1, 2], "grid": {"shape": [64, 64], "extent": [8, 8]}, "seed": 3},
            )
        ]
    )
    def post(self, request, name):
        """
        Validate the config, run the experiment and return its report.

        - Reports are written to disk only when ``output_dir`` is given.
        - A report with failing verdicts is still a 200; check ``passed``.

        Returns:
            - 200 OK: The report.
            - 400 Bad Request: Invalid config, or a violated precondition.
            - 404 Not Found: No experiment with this name.
        """
        try:
            config = build_config(name, request.data)
            report = run_experiment(config)
        except UnknownExperiment as exc:
            return Response(exc.as_dict(), status=status.HTTP_404_NOT_FOUND)
        except AnalysisError as exc:
            logger.info("experiment %s rejected: %s", name, exc)
            return Response(exc.as_dict(), status=status.HTTP_400_BAD_REQUEST)
        if config.get("output_dir"):
            emit_report(report, config["output_dir"])
        return Response(ReportSerializer(report.as_dict()).data)


class RhoEvaluate(APIView):
    """
    API View for evaluating the homogeneous quasi-norm.

    URLs:
        - POST /api/v1/rho/      : rho(x) for each posted point
    """
    permission_classes = [AllowAny]

    @extend_schema(
        summary="Evaluate rho at points",
        request=RhoRequestSerializer,
        responses=RhoResultSerializer,
        examples=[
            OpenApiExample(
                "Parabolic group",
                value={"exponents": [1, 2], "points": [[1, 0], [0, 1], [3, 4]]}
            )
        ]
    )
    def post(self, request):
        serializer = RhoRequestSerializer(data=request.data)
        if not serializer.is_valid():
            return Response(serializer.errors, status=status.HTTP_400_BAD_REQUEST)
        try:
            group = DilationGroup.from_config(serializer.validated_data)
            rho = group.rho(serializer.validated_data["points"])
        except AnalysisError as exc:
            return Response(exc.as_dict(), status=status.HTTP_400_BAD_REQUEST)
        result = {"exponents": list(group.exponents), "gamma": group.gamma, "rho": [float(r) for r in rho]}
        return Response(RhoResultSerializer(result).data)
