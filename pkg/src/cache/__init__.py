# Simulation cache module
