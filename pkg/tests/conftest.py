import hypothesis

hypothesis.settings.register_profile(
    "ci", deadline=None, max_examples=200, derandomize=True
)
hypothesis.settings.load_profile("ci")
