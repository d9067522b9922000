from datetime import timedelta

from hypothesis import settings

settings.register_profile(
    "default", max_examples=50, deadline=timedelta(seconds=30))
settings.load_profile("default")
