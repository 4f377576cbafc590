from pinwheelkit.__version__ import __version__
