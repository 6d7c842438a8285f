# Scenario configuration
