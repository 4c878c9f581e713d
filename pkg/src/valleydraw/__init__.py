"""Line drawings of 3D meshes as dark-valley approximations of headlight renderings."""

__version__ = "0.1.0"
