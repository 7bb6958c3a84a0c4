from django.apps import AppConfig


class MilConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'mil'
    verbose_name = 'Multi-instance learning'
