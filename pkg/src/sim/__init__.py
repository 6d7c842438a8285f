# Hybrid simulation core
