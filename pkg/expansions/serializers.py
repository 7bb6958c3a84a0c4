from rest_framework import serializers

from .services import pair_key


class ExpansionRecordSerializer(serializers.Serializer):
    text = serializers.CharField()
    images = serializers.ListField(
        child=serializers.ListField(child=serializers.FloatField()), allow_empty=True)

    def validate_text(self, value):
        """Validate expansion text"""
        if not value.strip():
            raise serializers.ValidationError("Expansion text cannot be empty")
        return value

    def validate_images(self, value):
        if value and len({len(image) for image in value}) != 1:
            raise serializers.ValidationError("All images must share one feature dimension")
        return value


class PageCountsSerializer(serializers.Serializer):
    total = serializers.IntegerField(min_value=1)
    single = serializers.DictField(child=serializers.IntegerField(min_value=0))
    pair = serializers.DictField(child=serializers.IntegerField(min_value=0), required=False, default=dict)

    def validate_pair(self, value):
        for key in value:
            terms = key.split('|')
            if len(terms) != 2 or key != pair_key(*terms):
                raise serializers.ValidationError(f"Pair key {key!r} must be 'a|b' with a <= b")
        return value


class RelevanceModelSerializer(serializers.Serializer):
    w = serializers.ListField(child=serializers.FloatField(), min_length=2, max_length=2)
    b = serializers.FloatField()


class RelevancePairsSerializer(serializers.Serializer):
    """Labeled (semantic distance, visual distance) pools for relevance training."""
    positive = serializers.ListField(
        child=serializers.ListField(child=serializers.FloatField(), min_length=2, max_length=2),
        allow_empty=False)
    negative = serializers.ListField(
        child=serializers.ListField(child=serializers.FloatField(), min_length=2, max_length=2),
        allow_empty=False)


class NegativePoolSerializer(serializers.Serializer):
    images = serializers.ListField(
        child=serializers.ListField(child=serializers.FloatField()), allow_empty=False)
