from rest_framework import generics
from rest_framework.permissions import IsAuthenticated
from rest_framework.response import Response
from rest_framework.throttling import UserRateThrottle

from .models import CurationRun
from .reports import render_manifest
from .serializers import CurationRunDetailSerializer, CurationRunSerializer


class CurationRunListView(generics.ListAPIView):
    queryset = CurationRun.objects.all()
    serializer_class = CurationRunSerializer
    permission_classes = [IsAuthenticated]
    throttle_classes = [UserRateThrottle]


class CurationRunDetailView(generics.RetrieveAPIView):
    queryset = CurationRun.objects.all()
    serializer_class = CurationRunDetailSerializer
    permission_classes = [IsAuthenticated]
    throttle_classes = [UserRateThrottle]


class CurationRunReportView(generics.RetrieveAPIView):
    """Plain-text report of a completed run."""
    queryset = CurationRun.objects.all()
    serializer_class = CurationRunSerializer
    permission_classes = [IsAuthenticated]
    throttle_classes = [UserRateThrottle]

    def retrieve(self, request, *args, **kwargs):
        run = self.get_object()
        if run.status != 'completed' or not run.manifest:
            return Response({'id': run.id, 'report': None, 'detail': 'Run has no manifest'})
        return Response({'id': run.id, 'report': render_manifest(run.manifest)})
