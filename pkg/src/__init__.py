# RemoteTrack - Remote Output Tracking Simulator
