# -*- coding: utf-8 -*-
# Copyright (c) 2020, IMOC Development Team
# Distributed under the terms of the Apache License 2.0
__version__ = "0.1.0"
