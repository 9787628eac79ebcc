import hypothesis

# JIT warmup on first kernel use can blow per-example deadlines
hypothesis.settings.register_profile(
    "bldsid", deadline=None, max_examples=50, derandomize=True
)
hypothesis.settings.load_profile("bldsid")
