# Closed-loop system and diagnostics
