from rest_framework import serializers

from .models import CurationRun


class InstanceRecordSerializer(serializers.Serializer):
    id = serializers.CharField()
    rank = serializers.IntegerField()
    features = serializers.ListField(child=serializers.FloatField(), allow_empty=True)


class BagRecordSerializer(serializers.Serializer):
    """One line of a bag file."""
    LABELS = {'pos': 'positive', 'neg': 'negative'}

    id = serializers.CharField()
    label = serializers.ChoiceField(choices=sorted(LABELS))
    expansion = serializers.CharField(required=False, allow_null=True, allow_blank=True)
    instances = InstanceRecordSerializer(many=True, allow_empty=True)


class CurationRunSerializer(serializers.ModelSerializer):
    seed = serializers.IntegerField(read_only=True)

    class Meta:
        model = CurationRun
        fields = ('id', 'source', 'seed', 'status', 'retained_bag_count', 'selected_count',
                  'created_at')
        read_only_fields = fields


class CurationRunDetailSerializer(serializers.ModelSerializer):
    seed = serializers.IntegerField(read_only=True)

    class Meta:
        model = CurationRun
        fields = ('id', 'source', 'seed', 'status', 'retained_bag_count', 'selected_count',
                  'config', 'manifest', 'created_at')
        read_only_fields = fields
