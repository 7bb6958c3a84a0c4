"""
Curation Run Models
===================

Persisted history of curation runs for the admin and the read-only API.

Models:
- CurationRun: config snapshot and manifest of one `curate --record` invocation
"""
from django.db import models


class CurationRun(models.Model):
    """
    Curation Run Model

    Fields:
        source: path of the bag file that was curated
        seed: seed of the run
        status: completed or failed
        retained_bag_count: number of bags kept by the bag classifier
        selected_count: size of the final even selection
        config: config snapshot (JSON)
        manifest: full manifest (JSON), empty for failed runs
        created_at: timestamp when the run was recorded
    """
    STATUSES = [
        ('completed', 'Completed'),
        ('failed', 'Failed'),
    ]

    source = models.CharField(max_length=500, blank=True)
    seed = models.DecimalField(max_digits=20, decimal_places=0, default=0)
    status = models.CharField(max_length=10, choices=STATUSES, default='completed')
    retained_bag_count = models.PositiveIntegerField(default=0)
    selected_count = models.PositiveIntegerField(default=0)
    config = models.JSONField(default=dict, blank=True)
    manifest = models.JSONField(default=dict, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        db_table = 'curation_runs'
        ordering = ['-created_at', '-id']

    def __str__(self):
        return f"{self.source or 'run'} #{self.pk} ({self.status})"
