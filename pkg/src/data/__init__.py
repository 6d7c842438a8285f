# Model catalogue module
