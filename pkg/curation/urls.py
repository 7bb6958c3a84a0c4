from django.urls import path
from .views import CurationRunDetailView, CurationRunListView, CurationRunReportView

urlpatterns = [
    path('runs/', CurationRunListView.as_view(), name='curation-runs'),
    path('runs/<int:pk>/', CurationRunDetailView.as_view(), name='curation-run-detail'),
    path('runs/<int:pk>/report/', CurationRunReportView.as_view(), name='curation-run-report'),
]
