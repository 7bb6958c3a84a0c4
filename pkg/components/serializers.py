from rest_framework import serializers


class ComponentGraphSerializer(serializers.Serializer):
    d = serializers.ListField(child=serializers.FloatField(min_value=0.0), allow_empty=False)
    e = serializers.ListField(
        child=serializers.ListField(child=serializers.FloatField(min_value=0.0, max_value=1.0)))

    def validate(self, attrs):
        n = len(attrs['d'])
        if len(attrs['e']) != n or any(len(row) != n for row in attrs['e']):
            raise serializers.ValidationError(f"Affinity matrix must be {n}x{n}")
        if any(attrs['e'][i][i] != 0 for i in range(n)):
            raise serializers.ValidationError("Affinity diagonal must be zero")
        return attrs
