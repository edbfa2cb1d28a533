# File codecs, CSV and heatmap output
