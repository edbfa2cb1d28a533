# Experiment registry and runners
