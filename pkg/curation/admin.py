from django.contrib import admin
from .models import CurationRun

@admin.register(CurationRun)
class CurationRunAdmin(admin.ModelAdmin):
    list_display = ('id', 'source', 'seed', 'status', 'retained_bag_count', 'selected_count', 'created_at')
    list_filter = ('status', 'created_at')
    search_fields = ('source',)
    readonly_fields = ('created_at', 'config', 'manifest')
