# Zooming encoder/decoder and channel frames
