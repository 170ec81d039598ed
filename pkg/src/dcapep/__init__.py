"""DCA worst-case analysis toolkit."""
